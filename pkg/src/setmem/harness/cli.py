"""Command-line entry point: ``setmem run|bench|check|dump-ellipsoids``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from dataclasses import replace

from .checks import SUITES
from .io import load_config, write_ellipsoid_dump, write_summary, write_trajectory_csv
from .scenario import ConfigError, ScenarioConfig, run_scenario, run_trial

EXIT_OK, EXIT_INVALID, EXIT_FAILED = 0, 1, 2

_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}

log = logging.getLogger("setmem")


def _setup_logging():
    level = os.environ.get("SETMEM_LOG", "warn").lower()
    logging.basicConfig(level=_LEVELS.get(level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    if level not in _LEVELS:
        log.warning("unknown SETMEM_LOG value %r, using 'warn'", level)


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="setmem", description="Ellipsoidal set-membership state estimation")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run one scenario config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True, help="trajectory CSV (first trial)")
    r.add_argument("--summary", help="summary JSON averaged over trials")
    r.add_argument("--dump", help="also write the per-step ellipsoids as JSON lines")

    b = sub.add_parser("bench", help="sweep measurement cases and dimensions")
    b.add_argument("--dims", type=_int_list, default=[10])
    b.add_argument("--cases", type=_int_list, default=[1, 2, 3])
    b.add_argument("--trials", type=int, default=25)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--horizon", type=int, default=100)
    b.add_argument("--out", help="report JSON (stdout table only when omitted)")
    b.add_argument("--timing", action="store_true", help="include wall times (makes output non-reproducible)")

    c = sub.add_parser("check", help="randomized property suites")
    c.add_argument("--suite", choices=[*SUITES, "all"], default="all")
    c.add_argument("--trials", type=int, help="override the suite's trial count")
    c.add_argument("--seed", type=int, default=0)

    d = sub.add_parser("dump-ellipsoids", help="write per-step center, shape and scale")
    d.add_argument("--config", required=True)
    d.add_argument("--out", required=True)
    return p


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    records, summary = run_scenario(cfg)
    write_trajectory_csv(records[0], args.out)
    if args.summary:
        write_summary(summary, args.summary, extra={"trials": cfg.trials})
    if args.dump:
        write_ellipsoid_dump(records[0], args.dump)
    return EXIT_OK


def bench_report(dims, cases, trials, seed, horizon, timing=False) -> dict:
    rows = []
    for n in dims:
        for case in cases:
            cfg = ScenarioConfig.benchmark(n, case, trials=trials, seed=seed, horizon=horizon)
            _, s = run_scenario(cfg)
            rows.append({"n": n, "case": case, **s.as_dict(timing)})
    return {"trials": trials, "seed": seed, "horizon": horizon, "rows": rows}


def _format_table(report: dict) -> str:
    cols = ["n", "case", "shrink_ratio", "trace_mean", "error_ratio", "err_mean"]
    if report["rows"] and "wall_ms" in report["rows"][0]:
        cols.append("wall_ms")
    lines = ["  ".join(f"{c:>12}" for c in cols)]
    for row in report["rows"]:
        lines.append("  ".join(f"{row[c]:>12}" if isinstance(row[c], int) else f"{row[c]:>12.4g}" for c in cols))
    return "\n".join(lines)


def _cmd_bench(args) -> int:
    if args.trials < 1 or args.horizon < 0 or any(c not in (1, 2, 3) for c in args.cases) or any(n < 1 for n in args.dims):
        raise ConfigError("bench needs trials >= 1, horizon >= 0, cases in {1,2,3} and positive dims")
    report = bench_report(args.dims, args.cases, args.trials, args.seed, args.horizon, args.timing)
    print(_format_table(report))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK


def _cmd_check(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    ok = True
    for name in names:
        kw = {"seed": args.seed}
        if args.trials is not None:
            kw["trials"] = args.trials
        res = SUITES[name](**kw)
        print(res.line())
        ok &= res.passed
    return EXIT_OK if ok else EXIT_FAILED


def _cmd_dump(args) -> int:
    cfg = replace(load_config(args.config), trials=1)
    write_ellipsoid_dump(run_trial(cfg, 0), args.out)
    return EXIT_OK


def main(argv=None) -> int:
    _setup_logging()
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; 2 is reserved for failed checks here
        return EXIT_INVALID if exc.code else EXIT_OK
    handler = {"run": _cmd_run, "bench": _cmd_bench, "check": _cmd_check, "dump-ellipsoids": _cmd_dump}[args.cmd]
    try:
        return handler(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
