"""Synthetic Zipf traces with popularity drift, and CSV IO for catalogs and traces."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..model import VideoCatalog

GB = 10**9

CATALOG_HEADER = ["video_id", "size_bytes", "popularity"]
TRACE_HEADER = ["seq", "sbs_id", "video_id"]


class TraceFormatError(ValueError):
    """Malformed catalog or trace file."""


@dataclass(frozen=True)
class RequestEvent:
    seq: int
    sbs: int
    video: int


@dataclass
class RequestTrace:
    """Request events as parallel arrays (video ids, not catalog indices)."""

    seq: np.ndarray
    sbs: np.ndarray
    video: np.ndarray

    def __post_init__(self):
        self.seq = np.asarray(self.seq, dtype=np.int64)
        self.sbs = np.asarray(self.sbs, dtype=np.int64)
        self.video = np.asarray(self.video, dtype=np.int64)
        if not (len(self.seq) == len(self.sbs) == len(self.video)):
            raise ValueError("trace columns differ in length")

    def __len__(self):
        return len(self.seq)

    def __iter__(self):
        for s, i, k in zip(self.seq.tolist(), self.sbs.tolist(), self.video.tolist()):
            yield RequestEvent(s, i, k)

    def __eq__(self, other):
        return (isinstance(other, RequestTrace)
                and np.array_equal(self.seq, other.seq)
                and np.array_equal(self.sbs, other.sbs)
                and np.array_equal(self.video, other.video))

    @classmethod
    def from_events(cls, events) -> "RequestTrace":
        events = list(events)
        return cls([e[0] for e in events], [e[1] for e in events], [e[2] for e in events])


@dataclass(frozen=True)
class TraceGenSpec:
    n_videos: int
    n_caches: int
    total_requests: int
    zipf_exponent: float = 0.8
    drift_epoch: int = 50_000
    drift_fraction: float = 0.1
    seed: int = 0
    min_size: int = int(2.5 * GB)
    max_size: int = 5 * GB

    def __post_init__(self):
        if self.n_videos < 1 or self.n_caches < 1:
            raise ValueError("need at least one video and one cache")
        if self.total_requests < 1:
            raise ValueError("total_requests must be >= 1")
        if self.zipf_exponent <= 0:
            raise ValueError("zipf exponent must be positive")
        if self.drift_epoch < 1:
            raise ValueError("drift epoch must be >= 1 request")
        if not 0.0 <= self.drift_fraction <= 1.0:
            raise ValueError("drift fraction must lie in [0, 1]")
        if not 0 < self.min_size <= self.max_size:
            raise ValueError("need 0 < min_size <= max_size")

    def to_dict(self) -> dict:
        return asdict(self)


def zipf_pmf(n: int, exponent: float) -> np.ndarray:
    weights = np.arange(1, n + 1, dtype=np.float64) ** -exponent
    return weights / weights.sum()


def generate_trace(spec: TraceGenSpec):
    """Catalog plus piecewise-stationary Zipf request trace.

    Video ids are ``0..K-1``. The catalog popularity is the Zipf mass each video
    has in the first epoch. Every ``drift_epoch`` requests the videos sitting at
    ``ceil(drift_fraction * K)`` randomly chosen ranks are shuffled among those
    ranks.
    """
    rng = np.random.default_rng(spec.seed)
    K = spec.n_videos
    sizes = rng.integers(spec.min_size, spec.max_size, size=K, endpoint=True)
    pmf = zipf_pmf(K, spec.zipf_exponent)
    cdf = np.cumsum(pmf)
    cdf[-1] = 1.0
    rank_to_video = rng.permutation(K)

    first_pop = np.empty(K)
    first_pop[rank_to_video] = pmf
    catalog = VideoCatalog(np.arange(K), sizes, first_pop)

    n_moved = math.ceil(spec.drift_fraction * K)
    videos = np.empty(spec.total_requests, dtype=np.int64)
    for start in range(0, spec.total_requests, spec.drift_epoch):
        stop = min(start + spec.drift_epoch, spec.total_requests)
        if start > 0 and n_moved > 0:
            ranks = rng.choice(K, size=n_moved, replace=False)
            rank_to_video[ranks] = rank_to_video[rng.permutation(ranks)]
        ranks = np.searchsorted(cdf, rng.random(stop - start), side="right")
        videos[start:stop] = rank_to_video[np.minimum(ranks, K - 1)]
    sbs = rng.integers(0, spec.n_caches, size=spec.total_requests)
    trace = RequestTrace(np.arange(spec.total_requests), sbs, videos)
    return catalog, trace


def _rows(path, header_required, optional=()):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceFormatError(f"{path}: line 1: missing header") from None
        header = [h.strip() for h in header]
        allowed = list(header_required) + list(optional)
        if header[:len(header_required)] != list(header_required) or any(h not in allowed for h in header):
            raise TraceFormatError(f"{path}: line 1: expected header {','.join(allowed)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise TraceFormatError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
            yield lineno, header, row


def load_catalog(path) -> VideoCatalog:
    ids, sizes, pops = [], [], []
    has_pop = None
    for lineno, header, row in _rows(path, CATALOG_HEADER[:2], CATALOG_HEADER[2:]):
        has_pop = len(header) == 3
        try:
            ids.append(int(row[0]))
            sizes.append(int(row[1]))
            if has_pop:
                pops.append(float(row[2]))
        except ValueError as exc:
            raise TraceFormatError(f"{path}: line {lineno}: {exc}") from None
    try:
        return VideoCatalog(np.array(ids, dtype=np.int64), np.array(sizes, dtype=np.int64),
                            np.array(pops) if has_pop else None)
    except ValueError as exc:
        raise TraceFormatError(f"{path}: {exc}") from None


def load_trace(path, catalog: VideoCatalog | None = None, n_caches: int | None = None) -> RequestTrace:
    """Parse a trace CSV; ids are checked against ``catalog`` and ``n_caches`` when given."""
    seq, sbs, video = [], [], []
    known = None if catalog is None else set(catalog.ids.tolist())
    for lineno, _, row in _rows(path, TRACE_HEADER):
        try:
            s, i, k = int(row[0]), int(row[1]), int(row[2])
        except ValueError as exc:
            raise TraceFormatError(f"{path}: line {lineno}: {exc}") from None
        if seq and s <= seq[-1]:
            raise TraceFormatError(f"{path}: line {lineno}: seq {s} is not increasing")
        if known is not None and k not in known:
            raise TraceFormatError(f"{path}: line {lineno}: unknown video id {k}")
        if i < 0 or (n_caches is not None and i >= n_caches):
            raise TraceFormatError(f"{path}: line {lineno}: sbs id {i} out of range")
        seq.append(s)
        sbs.append(i)
        video.append(k)
    return RequestTrace(seq, sbs, video)


def write_catalog(catalog: VideoCatalog, path) -> None:
    buf = io.StringIO()
    if catalog.popularity is None:
        buf.write(",".join(CATALOG_HEADER[:2]) + "\n")
        for k, s in zip(catalog.ids.tolist(), catalog.sizes.tolist()):
            buf.write(f"{k},{s}\n")
    else:
        buf.write(",".join(CATALOG_HEADER) + "\n")
        for k, s, p in zip(catalog.ids.tolist(), catalog.sizes.tolist(), catalog.popularity.tolist()):
            buf.write(f"{k},{s},{p!r}\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def write_trace(trace: RequestTrace, path) -> None:
    lines = [",".join(TRACE_HEADER)]
    lines.extend(f"{s},{i},{k}" for s, i, k in zip(trace.seq.tolist(), trace.sbs.tolist(), trace.video.tolist()))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def popularity_from_trace(catalog: VideoCatalog, trace: RequestTrace) -> VideoCatalog:
    """Catalog whose popularity is each video's share of the trace's requests."""
    idx = catalog.indices_of(trace.video)
    counts = np.bincount(idx, minlength=catalog.K).astype(np.float64)
    total = counts.sum()
    return catalog.with_popularity(counts / total if total else counts)
