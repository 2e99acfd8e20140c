"""Command line interface: chs run | study | verify.

Exit codes: 0 success, 1 usage/config error, 2 numerical failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import os
import sys

from .errors import ConfigError, SolverFailure, StepFailure

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_VERIFY = 3


def _load_config(path, for_study=False):
    from .config import parse_config
    with open(path) as fh:
        text = fh.read()
    return parse_config(text, for_study=for_study)


def _cmd_run(args) -> int:
    from .study import run_single
    try:
        cfg = _load_config(args.config)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    outdir = args.out or cfg.out
    try:
        run_single(cfg, outdir)
    except (StepFailure, SolverFailure) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"run complete; outputs in {outdir}")
    return EXIT_OK


def _cmd_study(args) -> int:
    from .study import run_study
    try:
        cfg = _load_config(args.config, for_study=True)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    outdir = args.out or cfg.out
    jobs = args.jobs or os.cpu_count() or 1
    result = run_study(cfg, outdir, jobs=jobs)
    for (a, b, status, rep, _), excl in zip(result.reports, result.excluded):
        total = "n/a" if rep is None else f"{rep.total:.6e}"
        flag = " [excluded]" if excl else ""
        print(f"alpha={a:g} beta={b:g}: {status}, total error {total}{flag}")
    print(f"floor estimate: {result.floor:.6e}")
    if result.rate is not None:
        print(f"fitted slope {result.rate.fitted_slope:.3f}, "
              f"r^2 {result.rate.r_squared:.4f}")
    else:
        print(f"rate fit refused: {result.fit_refusal}")
    if any(status != "ok" for _, _, status, _, _ in result.reports):
        return EXIT_NUMERICAL
    print(f"study complete; outputs in {outdir}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    from .verify import run_verify
    try:
        results = run_verify(args.suite or None)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for res in results:
        print(res)
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chs",
        description="Viscous Cahn-Hilliard tumor-growth solver and "
                    "vanishing-viscosity study harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate one configuration")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None)
    p_run.set_defaults(fn=_cmd_run)

    p_study = sub.add_parser("study", help="run a vanishing-viscosity sweep")
    p_study.add_argument("--config", required=True)
    p_study.add_argument("--out", default=None)
    p_study.add_argument("--jobs", type=int, default=None,
                         help="worker processes (default: cpu count)")
    p_study.set_defaults(fn=_cmd_study)

    p_verify = sub.add_parser("verify", help="run scheme-verification suites")
    p_verify.add_argument("--suite", action="append", default=None,
                          help="run only this suite (repeatable)")
    p_verify.set_defaults(fn=_cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
