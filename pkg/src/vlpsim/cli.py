"""Command-line front end: simulate flights, localize logs, compare methods.

Exit codes: 0 ok, 2 config/validation error, 3 data parse error, 4 solver
failed on every frame.
"""

from __future__ import annotations

import argparse
import glob
import io
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from .config import ConfigError, RunConfig, config_manifest, default_run_config, load_config, write_json_atomic
from .evaluate import METHODS, Comparison, compare_methods, run_method, write_estimate_trace
from .fusion import write_height_trace
from .sensors import LogParseError, read_log, write_log
from .sim import PlanValidationError, run_flight

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARSE = 3
EXIT_SOLVER = 4


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _load(config_path: Optional[str]) -> RunConfig:
    if config_path is None:
        return default_run_config()
    return load_config(config_path)


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def cmd_simulate(args) -> int:
    try:
        cfg = _load(args.config)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    names = list(cfg.flights) if args.flight == "all" else [args.flight]
    unknown = [n for n in names if n not in cfg.flights]
    if unknown:
        return _fail(EXIT_CONFIG, f"unknown flight(s) {unknown}; available: {sorted(cfg.flights)}")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs: List[str] = []
    for i, name in enumerate(names):
        try:
            frames = run_flight(
                cfg.testbed, cfg.flights[name], cfg.baro, cfg.imu, rng_seed=[args.seed, i]
            )
        except PlanValidationError as exc:
            return _fail(EXIT_CONFIG, f"flight {name!r}: {exc}")
        log_path = out_dir / f"{name}.csv"
        buf = io.StringIO()
        write_log(frames, buf)
        _atomic_write_text(log_path, buf.getvalue())
        outputs.append(str(log_path))
        print(f"wrote {log_path} ({len(frames)} frames)")
    manifest = config_manifest(cfg, args.seed, outputs)
    manifest["command"] = "simulate"
    manifest["flights"] = names
    write_json_atomic(out_dir / "manifest.json", manifest)
    print(f"wrote {out_dir / 'manifest.json'}")
    return EXIT_OK


def _apply_fusion_flags(cfg: RunConfig, args) -> RunConfig:
    drift = cfg.drift
    if getattr(args, "epsilon", None) is not None:
        drift = replace(drift, epsilon=args.epsilon)
    if getattr(args, "stride_k", None) is not None:
        drift = replace(drift, stride_k=args.stride_k)
    cfg.drift = drift
    return cfg


def cmd_localize(args) -> int:
    try:
        cfg = _apply_fusion_flags(_load(args.config), args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    method = args.method.replace("-", "_")
    if method not in METHODS:
        return _fail(EXIT_CONFIG, f"unknown method {args.method!r}; expected one of {METHODS}")
    log_path = Path(args.log)
    try:
        with open(log_path) as fh:
            frames = read_log(fh)
    except FileNotFoundError:
        return _fail(EXIT_PARSE, f"log file not found: {log_path}")
    except LogParseError as exc:
        return _fail(EXIT_PARSE, f"{log_path}: {exc}")
    if not frames:
        return _fail(EXIT_PARSE, f"{log_path}: log contains no frames")

    run = run_method(
        frames,
        method,
        cfg.testbed,
        indirect_cfg=cfg.indirect,
        pso_cfg=cfg.pso,
        filter_cfg=cfg.filter,
        drift_cfg=cfg.drift,
        seed=args.seed,
    )
    if run.n_failed == run.n_frames:
        return _fail(EXIT_SOLVER, f"{method} failed on all {run.n_frames} frames")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = out_dir / f"{log_path.stem}_{method}.csv"
    buf = io.StringIO()
    write_estimate_trace(run, frames, buf)
    _atomic_write_text(trace_path, buf.getvalue())
    print(f"wrote {trace_path} ({run.n_frames - run.n_failed}/{run.n_frames} frames solved)")
    if method == "firefly":
        height_path = out_dir / f"{log_path.stem}_heights.csv"
        buf = io.StringIO()
        write_height_trace([h for h in run.heights if h is not None], frames, buf)
        _atomic_write_text(height_path, buf.getvalue())
        print(f"wrote {height_path}")
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        cfg = _apply_fusion_flags(_load(args.config), args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    methods = [m.strip().replace("-", "_") for m in args.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad:
        return _fail(EXIT_CONFIG, f"unknown method(s) {bad}; expected from {METHODS}")
    paths = sorted(glob.glob(args.logs))
    if not paths:
        return _fail(EXIT_CONFIG, f"no logs match {args.logs!r}")
    logs = []
    for p in paths:
        try:
            with open(p) as fh:
                logs.append(read_log(fh))
        except LogParseError as exc:
            return _fail(EXIT_PARSE, f"{p}: {exc}")

    comparison: Comparison = compare_methods(
        logs,
        methods,
        cfg.testbed,
        indirect_cfg=cfg.indirect,
        pso_cfg=cfg.pso,
        filter_cfg=cfg.filter,
        drift_cfg=cfg.drift,
        seed=args.seed,
    )
    print(comparison.to_text())
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    comparison.to_csv(buf)
    _atomic_write_text(out_dir / "comparison.csv", buf.getvalue())
    print(f"wrote {out_dir / 'comparison.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vlpsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="simulate flights into sensor logs")
    p_sim.add_argument("--config", help="TOML run configuration (defaults built in)")
    p_sim.add_argument("--flight", default="all", help="flight name from the config, or 'all'")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", default="runs")
    p_sim.set_defaults(func=cmd_simulate)

    p_loc = sub.add_parser("localize", help="run one solver over a sensor log")
    p_loc.add_argument("--log", required=True)
    p_loc.add_argument("--method", required=True, help="firefly | indirect_h | pso_3d")
    p_loc.add_argument("--config")
    p_loc.add_argument("--seed", type=int, default=0)
    p_loc.add_argument("--out", default="runs")
    p_loc.add_argument("--epsilon", type=float, help="drift-correction blend weight")
    p_loc.add_argument("--stride-k", dest="stride_k", type=int, help="frames between corrections")
    p_loc.set_defaults(func=cmd_localize)

    p_cmp = sub.add_parser("compare", help="compare methods over a batch of logs")
    p_cmp.add_argument("--logs", required=True, help="glob of sensor-log CSVs")
    p_cmp.add_argument("--methods", default=",".join(METHODS))
    p_cmp.add_argument("--config")
    p_cmp.add_argument("--seed", type=int, default=0)
    p_cmp.add_argument("--out", default="runs")
    p_cmp.add_argument("--epsilon", type=float)
    p_cmp.add_argument("--stride-k", dest="stride_k", type=int)
    p_cmp.set_defaults(func=cmd_compare)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        return _fail(EXIT_CONFIG, str(exc))


if __name__ == "__main__":
    sys.exit(main())
