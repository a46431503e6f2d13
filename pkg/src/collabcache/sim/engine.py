"""Trace-driven simulation of CCA-online and the collaborative LRU/LFU baselines."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..cca import cca_general, cca_greedy_only
from ..model import CachePool, DelayParams, VideoCatalog
from ..online import PopularityEstimator, ewma_update, plan_reoptimization, should_reoptimize
from .policies import NEIGHBOR, REMOTE, SELF, STEPS, make_state
from .trace import RequestTrace

POLICIES = ("cca", "lru", "lfu", "cca-nocollab")

METRICS_HEADER = [
    "window", "avg_delay_s",
    "delivery_local_bytes", "delivery_remote_bytes",
    "reopt_local_bytes", "reopt_remote_bytes",
    "hits_self", "hits_neighbor", "hits_remote",
]

_CODE = {SELF: 0, NEIGHBOR: 1, REMOTE: 2}


@dataclass(frozen=True)
class PolicyConfig:
    """Which policy to run and its knobs.

    ``window`` is W in requests; for lru/lfu it only sets the metric granularity.
    ``neighbor_serving=False`` sends every non-self miss to the remote server.
    """

    name: str = "cca"
    window: int = 35_000
    alpha: float = 0.4
    threshold: float = 0.0
    neighbor_serving: bool = True

    def __post_init__(self):
        if self.name not in POLICIES:
            raise ValueError(f"unknown policy {self.name!r}; choose from {', '.join(POLICIES)}")
        if self.window < 1:
            raise ValueError("window must be >= 1 request")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.threshold < 0:
            raise ValueError("reoptimization threshold must be >= 0")


@dataclass(frozen=True)
class WindowRecord:
    window: int
    avg_delay_s: float
    delivery_local_bytes: int
    delivery_remote_bytes: int
    reopt_local_bytes: int
    reopt_remote_bytes: int
    hits_self: int
    hits_neighbor: int
    hits_remote: int

    @property
    def requests(self) -> int:
        return self.hits_self + self.hits_neighbor + self.hits_remote


@dataclass
class SimMetrics:
    records: list = field(default_factory=list)
    policy: PolicyConfig | None = None
    seed: int = 0

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write(",".join(METRICS_HEADER) + "\n")
        for r in self.records:
            vals = asdict(r)
            row = [str(vals["window"]), f"{vals['avg_delay_s']:.6f}"]
            row += [str(int(vals[h])) for h in METRICS_HEADER[2:]]
            buf.write(",".join(row) + "\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    @classmethod
    def from_csv(cls, path) -> "SimMetrics":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != METRICS_HEADER:
                raise ValueError(f"{path}: unexpected metrics header")
            recs = [WindowRecord(int(r["window"]), float(r["avg_delay_s"]),
                                 *(int(r[h]) for h in METRICS_HEADER[2:])) for r in reader]
        return cls(recs)


def _record(t, codes, req_sizes, dp, reopt=(0, 0)) -> WindowRecord:
    counts = np.bincount(codes, minlength=3)
    n = len(codes)
    delay = (counts[1] * dp.d + counts[2] * dp.D) / n if n else 0.0
    return WindowRecord(
        window=t,
        avg_delay_s=float(delay),
        delivery_local_bytes=int(req_sizes[codes == 1].sum()),
        delivery_remote_bytes=int(req_sizes[codes == 2].sum()),
        reopt_local_bytes=int(reopt[0]),
        reopt_remote_bytes=int(reopt[1]),
        hits_self=int(counts[0]),
        hits_neighbor=int(counts[1]),
        hits_remote=int(counts[2]),
    )


def _check_inputs(trace: RequestTrace, cat: VideoCatalog, pool: CachePool) -> np.ndarray:
    if pool.N < 1:
        raise ValueError("simulation needs at least one cache")
    if len(trace) and (trace.sbs.min() < 0 or trace.sbs.max() >= pool.N):
        bad = trace.sbs[(trace.sbs < 0) | (trace.sbs >= pool.N)][0]
        raise ValueError(f"trace names sbs {bad} but the pool has {pool.N} caches")
    return cat.indices_of(trace.video)


def _run_cca(idx, sbs, cat, pool, dp, policy: PolicyConfig):
    solve = cca_general if policy.name == "cca" else cca_greedy_only
    W = policy.window
    est = PopularityEstimator.cold(cat.K, W, policy.alpha)
    placed_with = est
    x = np.zeros((pool.N, cat.K), dtype=bool)
    contents = [set() for _ in range(pool.N)]
    pending = (0, 0)
    records = []
    n_windows = -(-len(idx) // W)
    for t in range(n_windows):
        vid, at = idx[t * W:(t + 1) * W], sbs[t * W:(t + 1) * W]
        own = x[at, vid]
        elsewhere = x[:, vid].any(axis=0) if policy.neighbor_serving else np.zeros(len(vid), bool)
        codes = np.where(own, 0, np.where(elsewhere, 1, 2))
        records.append(_record(t, codes, cat.sizes[vid], dp, pending))
        pending = (0, 0)
        if t == n_windows - 1:
            break
        est = ewma_update(est, np.bincount(vid, minlength=cat.K))
        if should_reoptimize(placed_with, est, policy.threshold):
            new_p = solve(cat.with_popularity(est.estimates), pool, dp)
            plan = plan_reoptimization(contents, new_p, cat)
            pending = (plan.local_bytes, plan.remote_bytes)
            x = new_p.x.astype(bool)
            contents = new_p.contents()
            placed_with = est
    return records


def _run_replacement(idx, sbs, cat, pool, dp, policy: PolicyConfig):
    state = make_state(policy.name, pool.capacities, cat.sizes, policy.neighbor_serving)
    step = STEPS[policy.name]
    codes = np.empty(len(idx), dtype=np.int64)
    for n, event in enumerate(zip(sbs.tolist(), idx.tolist())):
        outcome, state = step(state, event)
        codes[n] = _CODE[outcome.kind]
    W = policy.window
    return [_record(t, codes[s:s + W], cat.sizes[idx[s:s + W]], dp)
            for t, s in enumerate(range(0, len(idx), W))]


def run_simulation(trace: RequestTrace, cat: VideoCatalog, pool: CachePool, dp: DelayParams,
                   policy: PolicyConfig | str = "cca", seed: int = 0) -> SimMetrics:
    """Replay ``trace`` from a cold start and return one metrics record per window.

    For cca and cca-nocollab the placement is recomputed at each window boundary
    from EWMA popularity estimates, and the transfer bytes of that change are
    booked in the window that follows it. Every policy here is deterministic, so
    ``seed`` is only carried through to the result.
    """
    if isinstance(policy, str):
        policy = PolicyConfig(policy)
    idx = _check_inputs(trace, cat, pool)
    sbs = trace.sbs
    if policy.name in ("cca", "cca-nocollab"):
        records = _run_cca(idx, sbs, cat, pool, dp, policy)
    else:
        records = _run_replacement(idx, sbs, cat, pool, dp, policy)
    return SimMetrics(records, policy, seed)


def final_quartile(values) -> np.ndarray:
    """Last quarter of a per-window series (at least one entry)."""
    values = np.asarray(values)
    return values[-max(1, len(values) // 4):]
