"""Command-line front end: ``solve``, ``oracle``, ``simulate`` and ``gen-trace``.

Every command takes ``--config`` (a JSON config, or a manifest written by an
earlier run) and flag overrides; flags win. Exit status is 0 on success, 1 on a
runtime failure and 2 on a usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .cca import cca_fractional, cca_general, cca_greedy_only, cca_unit, epsilon, rounding_gap_bound
from .model import CachePool, DelayParams, Placement, average_delay_objective, fractional_objective, reward_objective
from .oracle import BudgetExceeded, OracleBudget, brute_force_opt
from .sim.engine import POLICIES, PolicyConfig, run_simulation
from .sim.trace import (TraceFormatError, TraceGenSpec, generate_trace, load_catalog, load_trace,
                        popularity_from_trace, write_catalog, write_trace)

log = logging.getLogger("collabcache")

GB = 10**9
ALGORITHMS = {"unit": cca_unit, "general": cca_general, "greedy-only": cca_greedy_only}


class ConfigError(Exception):
    """Bad flags, config values or input files (exit status 2)."""


@dataclass
class ExperimentConfig:
    caches: list = field(default_factory=lambda: [500 * GB] * 4)
    d_ms: int = 500
    D_ms: int = 5000
    algorithm: str = "general"
    policy: str = "cca"
    window: list = field(default_factory=lambda: [35_000])
    alpha: float = 0.4
    threshold: float = 0.0
    neighbor_serving: bool = True
    catalog: str | None = None
    trace: str | None = None
    tracegen: dict | None = None
    out: str | None = None
    seed: int = 0
    jobs: int = 1
    max_states: int = 10**8
    time_limit: float = 60.0

    def validate(self) -> "ExperimentConfig":
        if not self.caches or any(int(c) < 0 for c in self.caches):
            raise ConfigError("caches must be a non-empty list of non-negative byte counts")
        if not (0 <= self.d_ms < self.D_ms):
            raise ConfigError(f"need 0 <= d < D, got d={self.d_ms} ms, D={self.D_ms} ms")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}")
        if not self.window or any(int(w) < 1 for w in self.window):
            raise ConfigError("window values must be positive integers")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("alpha must lie in [0, 1]")
        if self.threshold < 0:
            raise ConfigError("threshold must be >= 0")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.max_states < 1 or self.time_limit <= 0:
            raise ConfigError("oracle budget must be positive")
        return self

    @property
    def delays(self) -> DelayParams:
        return DelayParams.from_ms(self.d_ms, self.D_ms)

    @property
    def pool(self) -> CachePool:
        return CachePool(np.array([int(c) for c in self.caches], dtype=np.int64))

    def trace_spec(self) -> TraceGenSpec:
        params = dict(n_videos=3000, n_caches=len(self.caches), total_requests=1_050_000, seed=self.seed)
        params.update(self.tracegen or {})
        try:
            return TraceGenSpec(**params)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad trace generator settings: {exc}") from None


_SIZE = re.compile(r"^\s*(\d+(?:\.\d+)?)\s*([kmgt]?b?)?\s*$", re.IGNORECASE)
_UNITS = {"": 1, "b": 1, "k": 10**3, "kb": 10**3, "m": 10**6, "mb": 10**6,
          "g": 10**9, "gb": 10**9, "t": 10**12, "tb": 10**12}


def parse_bytes(text: str) -> int:
    """``"500GB"`` -> 500_000_000_000; bare numbers are bytes."""
    m = _SIZE.match(str(text))
    if not m:
        raise ConfigError(f"cannot parse size {text!r}")
    value = float(m.group(1)) * _UNITS[(m.group(2) or "").lower()]
    if value != int(value):
        raise ConfigError(f"size {text!r} is not a whole number of bytes")
    return int(value)


def _int_list(text: str) -> list:
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


def load_config(path) -> ExperimentConfig:
    """Read a config JSON or a run manifest (its ``config`` entry is used)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if isinstance(data, dict) and "config" in data and isinstance(data["config"], dict):
        data = data["config"]
    return config_from_dict(data)


def config_from_dict(data: dict) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    data = dict(data)
    if "caches" in data:
        caches = data["caches"]
        data["caches"] = [parse_bytes(c) for c in (caches.split(",") if isinstance(caches, str) else caches)]
    if "window" in data:
        w = data["window"]
        data["window"] = _int_list(w) if isinstance(w, str) else ([int(w)] if isinstance(w, int) else [int(v) for v in w])
    return ExperimentConfig(**data)


def _overrides(args) -> dict:
    out = {}
    if getattr(args, "caches", None) is not None:
        out["caches"] = [parse_bytes(c) for c in args.caches.split(",") if c.strip()]
    if getattr(args, "window", None) is not None:
        out["window"] = _int_list(args.window)
    for name in ("d_ms", "D_ms", "algorithm", "policy", "alpha", "threshold", "catalog", "trace",
                 "out", "seed", "jobs", "max_states", "time_limit"):
        value = getattr(args, name, None)
        if value is not None:
            out[name] = value
    if getattr(args, "no_neighbor_serving", False):
        out["neighbor_serving"] = False
    gen = {}
    for flag, key in (("videos", "n_videos"), ("requests", "total_requests"), ("zipf", "zipf_exponent"),
                      ("drift_epoch", "drift_epoch"), ("drift_fraction", "drift_fraction"),
                      ("n_caches", "n_caches")):
        value = getattr(args, flag, None)
        if value is not None:
            gen[key] = value
    if gen:
        out["tracegen"] = gen
    return out


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    over = _overrides(args)
    if "tracegen" in over:
        over["tracegen"] = {**(cfg.tracegen or {}), **over["tracegen"]}
    return replace(cfg, **over).validate()


def manifest(command: str, cfg: ExperimentConfig) -> dict:
    return {
        "command": command,
        "config": asdict(cfg),
        "seed": cfg.seed,
        "versions": {"collabcache": __version__, "numpy": np.__version__, "python": platform.python_version()},
    }


def write_manifest(path, command: str, cfg: ExperimentConfig) -> Path:
    path = Path(path)
    path.write_text(json.dumps(manifest(command, cfg), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.stem + ".manifest.json")


def _catalog(cfg: ExperimentConfig, need_popularity: bool = True):
    if not cfg.catalog:
        raise ConfigError("no catalog given (use --catalog PATH)")
    path = Path(cfg.catalog)
    if not path.exists():
        raise ConfigError(f"catalog file not found: {path}")
    try:
        cat = load_catalog(path)
    except TraceFormatError as exc:
        raise ConfigError(str(exc)) from None
    if need_popularity and cat.popularity is None:
        if not cfg.trace:
            raise ConfigError(f"{path} has no popularity column; pass --trace to derive it")
        cat = popularity_from_trace(cat, _trace(cfg, cat))
    return cat


def _trace(cfg: ExperimentConfig, cat):
    path = Path(cfg.trace)
    if not path.exists():
        raise ConfigError(f"trace file not found: {path}")
    try:
        return load_trace(path, cat, len(cfg.caches))
    except TraceFormatError as exc:
        raise ConfigError(str(exc)) from None


def _write_placement(p: Placement, cat, path) -> None:
    lines = ["cache_id,video_id"]
    for i, row in enumerate(p.x):
        for k in sorted(cat.ids[np.flatnonzero(row)].tolist()):
            lines.append(f"{i},{k}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_solve(cfg: ExperimentConfig) -> int:
    cat = _catalog(cfg)
    pool, dp = cfg.pool, cfg.delays
    try:
        p = ALGORITHMS[cfg.algorithm](cat, pool, dp)
    except ValueError as exc:
        raise ConfigError(f"{cfg.algorithm}: {exc}") from None
    fp, _ = cca_fractional(cat, pool, dp)
    frac = fractional_objective(fp, cat, dp) if cat.K and pool.N else 0.0
    bound = rounding_gap_bound(cat, pool, dp)
    print(f"algorithm          {cfg.algorithm}")
    print(f"reward             {reward_objective(p, cat, dp):.6f}")
    print(f"average_delay_s    {average_delay_objective(p, cat, dp):.6f}")
    print(f"fractional_reward  {frac:.6f}")
    print(f"epsilon            {epsilon(cat, pool):.6f}")
    print(f"rounding_bound     {bound:.6f}")
    print(f"guaranteed_reward  {max(0.0, 1.0 - bound) * frac:.6f}")
    if cfg.out:
        out = Path(cfg.out)
        _write_placement(p, cat, out)
        write_manifest(_manifest_path(out), "solve", cfg)
        print(f"placement written to {out}")
    return 0


def cmd_oracle(cfg: ExperimentConfig) -> int:
    cat = _catalog(cfg)
    pool, dp = cfg.pool, cfg.delays
    budget = OracleBudget(cfg.max_states, cfg.time_limit)
    try:
        opt, opt_reward = brute_force_opt(cat, pool, dp, budget)
    except BudgetExceeded as exc:
        print(f"refusing: instance exceeds the oracle budget ({exc})", file=sys.stderr)
        return 1
    p = cca_general(cat, pool, dp)
    cca_delay = average_delay_objective(p, cat, dp)
    opt_delay = average_delay_objective(opt, cat, dp)
    ratio = cca_delay / opt_delay if opt_delay > 0 else (1.0 if cca_delay == 0 else float("inf"))
    print(f"opt_reward         {opt_reward:.6f}")
    print(f"cca_reward         {reward_objective(p, cat, dp):.6f}")
    print(f"opt_delay_s        {opt_delay:.6f}")
    print(f"cca_delay_s        {cca_delay:.6f}")
    print(f"delay_ratio        {ratio:.6f}")
    if cfg.out:
        out = Path(cfg.out)
        _write_placement(opt, cat, out)
        write_manifest(_manifest_path(out), "oracle", cfg)
    return 0


def _sim_inputs(cfg: ExperimentConfig):
    if cfg.trace:
        cat = _catalog(cfg, need_popularity=False)
        return cat, _trace(cfg, cat)
    spec = cfg.trace_spec()
    if spec.n_caches != len(cfg.caches):
        raise ConfigError(f"trace generator uses {spec.n_caches} caches but the pool has {len(cfg.caches)}")
    return generate_trace(spec)


def _run_one(cfg: ExperimentConfig, window: int, out: Path | None) -> str:
    cat, trace = _sim_inputs(cfg)
    policy = PolicyConfig(cfg.policy, window, cfg.alpha, cfg.threshold, cfg.neighbor_serving)
    metrics = run_simulation(trace, cat, cfg.pool, cfg.delays, policy, cfg.seed)
    text = metrics.to_csv()
    if out is not None:
        out.write_text(text, encoding="utf-8")
        write_manifest(_manifest_path(out), "simulate", replace(cfg, window=[window], out=str(out)))
    return text


def _sweep_path(out: Path, window: int) -> Path:
    return out.with_name(f"{out.stem}_W{window}{out.suffix or '.csv'}")


def cmd_simulate(cfg: ExperimentConfig) -> int:
    # fail fast on bad inputs before any worker starts
    if cfg.trace:
        _sim_inputs(cfg)
    else:
        cfg.trace_spec()
    out = Path(cfg.out) if cfg.out else None
    windows = list(cfg.window)
    if len(windows) == 1:
        text = _run_one(cfg, windows[0], out)
        if out is None:
            sys.stdout.write(text)
        else:
            print(f"metrics written to {out}")
        return 0
    if out is None:
        raise ConfigError("a window sweep needs --out to name its CSV files")
    paths = [_sweep_path(out, w) for w in windows]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            list(pool.map(_run_one, [cfg] * len(windows), windows, paths))
    else:
        for w, path in zip(windows, paths):
            _run_one(cfg, w, path)
    for path in paths:
        print(f"metrics written to {path}")
    return 0


def cmd_gen_trace(cfg: ExperimentConfig) -> int:
    if not cfg.out:
        raise ConfigError("gen-trace needs --out DIR")
    spec = cfg.trace_spec()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    cat, trace = generate_trace(spec)
    write_catalog(cat, out / "catalog.csv")
    write_trace(trace, out / "trace.csv")
    write_manifest(out / "manifest.json", "gen-trace", cfg)
    print(f"wrote {cat.K} videos to {out / 'catalog.csv'} and {len(trace)} requests to {out / 'trace.csv'}")
    return 0


COMMANDS = {"solve": cmd_solve, "oracle": cmd_oracle, "simulate": cmd_simulate, "gen-trace": cmd_gen_trace}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config or run manifest")
    common.add_argument("--caches", help='capacities, e.g. "500GB,500GB" (bare numbers are bytes)')
    common.add_argument("--d-ms", dest="d_ms", type=int, help="neighbor delay in ms")
    common.add_argument("--D-ms", dest="D_ms", type=int, help="remote delay in ms")
    common.add_argument("--catalog", help="catalog CSV (video_id,size_bytes[,popularity])")
    common.add_argument("--trace", help="trace CSV (seq,sbs_id,video_id)")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output path")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="collabcache", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    solve = sub.add_parser("solve", parents=[common], help="compute a placement")
    solve.add_argument("--algorithm", choices=sorted(ALGORITHMS))

    oracle = sub.add_parser("oracle", parents=[common], help="exact optimum for small instances")
    oracle.add_argument("--max-states", dest="max_states", type=int)
    oracle.add_argument("--time-limit", dest="time_limit", type=float)

    gen = _Parser(add_help=False)
    gen.add_argument("--videos", type=int, help="catalog size K")
    gen.add_argument("--requests", type=int, help="trace length")
    gen.add_argument("--zipf", type=float, help="Zipf exponent")
    gen.add_argument("--drift-epoch", dest="drift_epoch", type=int, help="requests between drifts")
    gen.add_argument("--drift-fraction", dest="drift_fraction", type=float, help="share of ranks shuffled")
    gen.add_argument("--n-caches", dest="n_caches", type=int, help="SBS count in the trace")

    sim = sub.add_parser("simulate", parents=[common, gen], help="trace-driven simulation")
    sim.add_argument("--policy", choices=sorted(POLICIES))
    sim.add_argument("--window", help="W in requests; a comma list runs a sweep")
    sim.add_argument("--alpha", type=float)
    sim.add_argument("--threshold", type=float, help="re-optimization L1 threshold")
    sim.add_argument("--no-neighbor-serving", dest="no_neighbor_serving", action="store_true")
    sim.add_argument("--jobs", type=int)

    sub.add_parser("gen-trace", parents=[common, gen], help="write a synthetic catalog and trace")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except Exception as exc:  # noqa: BLE001
        log.debug("failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
