"""Command-line entry point.

``bsqkf run <config> --out <dir> [--seed N] [--jobs N]``
``bsqkf describe-config``
``bsqkf weights-check [--tol T]``

Exit codes: 0 success, 1 weights check failed, 2 config error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .experiments import ConfigError, NumericalFailure, describe_config, run_experiment, weights_check

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


def _parser():
    p = argparse.ArgumentParser(prog="bsqkf", description="Bayes-Sard quadrature moment transforms and filters.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config", help="YAML config file")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seed", type=int, default=None, help="override the master seed")
    run.add_argument("--jobs", type=int, default=1, help="worker processes for Monte Carlo runs")

    sub.add_parser("describe-config", help="print the config schema and defaults")

    wc = sub.add_parser("weights-check", help="compare Bayes-Sard and classical mean weights")
    wc.add_argument("--tol", type=float, default=None,
                    help="tolerance for all checks (default: 1e-12 for UT, 1e-9 for Gauss-Hermite)")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "describe-config":
        print(describe_config())
        return EXIT_OK
    if args.command == "weights-check":
        kw = {} if args.tol is None else {"tol_ut": args.tol, "tol_gh": args.tol}
        checks = weights_check(**kw)
        ok = all(c["passed"] for c in checks)
        print(json.dumps({"passed": ok, "checks": checks}, indent=2))
        return EXIT_OK if ok else EXIT_CHECK_FAILED
    try:
        summary = run_experiment(args.config, args.out, seed=args.seed, jobs=args.jobs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for name, scores in summary["scores"].items():
        cells = ", ".join(f"{k} {v['cell']}" for k, v in scores.items())
        print(f"{name}: {cells}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
