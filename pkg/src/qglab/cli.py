"""Command line driver: run verification suites, emit reports.

Exit codes: 0 when every check passes, 1 on a failed check, 2 on a
configuration error.  Config files are JSON: {"suite": ..., "instance":
{...}, "tolerances": {...}, "seed": 0}; command line flags override file
values.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor

from .reports import ExperimentConfig, emit
from .suites import list_suites, run_suite

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qg-lab",
        description="verification suites for twisted and Rieffel-deformed quantum groups",
    )
    parser.add_argument("--suite", help="suite name (see --list)")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--out", help="report output path")
    parser.add_argument("--format", choices=("json", "csv"), default=None, dest="fmt")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--tol", action="append", default=[],
                        help="NAME=VALUE tolerance override (repeatable)")
    parser.add_argument("--set", action="append", default=[], dest="params",
                        help="NAME=VALUE instance parameter (repeatable)")
    parser.add_argument("--quiet", action="store_true")
    parser.add_argument("--parallel", action="store_true",
                        help="run multiple configs concurrently")
    parser.add_argument("--timing", action="store_true",
                        help="include wall time and versions in the report")
    parser.add_argument("--list", action="store_true", help="list built-in suites")
    return parser


def _parse_kv(pairs, cast):
    out = {}
    for item in pairs:
        if "=" not in item:
            raise ValueError(f"expected NAME=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k] = cast(v)
        except ValueError:
            out[k] = v
    return out


def _load_config(args) -> ExperimentConfig:
    if args.config:
        with open(args.config) as fh:
            cfg = ExperimentConfig.from_json(fh.read())
    else:
        if not args.suite:
            raise ValueError("either --suite or --config is required")
        cfg = ExperimentConfig(suite=args.suite)
    overrides = {}
    if args.suite:
        overrides["suite"] = args.suite
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out:
        overrides["out"] = args.out
    if args.fmt:
        overrides["fmt"] = args.fmt
    if args.tol:
        tols = dict(cfg.tolerances)
        tols.update(_parse_kv(args.tol, float))
        overrides["tolerances"] = tols
    if args.params:
        inst = dict(cfg.instance)
        inst.update(_parse_kv(args.params, _auto_cast))
        overrides["instance"] = inst
    if args.parallel:
        overrides["parallel"] = True
    return cfg.override(**overrides)


def _auto_cast(v: str):
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            continue
    return v


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list:
        for name, desc in sorted(list_suites().items()):
            print(f"{name:16s} {desc}")
        return 0
    try:
        cfg = _load_config(args)
        if cfg.suite not in list_suites():
            raise ValueError(f"unknown suite: {cfg.suite!r}")
        if cfg.tolerances and any(t <= 0 for t in cfg.tolerances.values()):
            raise ValueError("tolerances must be positive")
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    report = run_suite(cfg)
    if not args.quiet:
        for c in report.checks:
            status = "pass" if c.passed else "FAIL"
            print(f"[{status}] {report.suite}/{report.instance} {c.check_id}: "
                  f"residual={c.residual:.3e} tol={c.tolerance:.1e}")
        print(f"suite {report.suite}: {'all checks pass' if report.all_passed else 'FAILURES'} "
              f"({report.wall_time_s:.2f}s)")
    if cfg.out:
        emit(report, cfg.out, cfg.fmt, include_volatile=args.timing)
    return 0 if report.all_passed else 1


if __name__ == "__main__":
    sys.exit(main())
