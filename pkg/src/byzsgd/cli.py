"""Command-line entry point.

Subcommands:
  run        execute an experiment config and write the records CSV
  summarize  aggregate a records CSV (optionally rendering figures)
  verify     run the acceptance suite and print pass/fail per criterion

Exit codes: 0 success, 1 failed verification, 2 configuration error,
3 internal invariant violation (a bug trap, not a user error).
"""

from __future__ import annotations

import argparse
import sys

from .engine import InvariantViolation, run_experiment
from .harness import ConfigError, emit_csv, format_summary, load_csv, parse_config, summarize


def _cmd_run(args) -> int:
    config = parse_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.trials is not None:
        config.trials = args.trials
    if args.out is not None:
        config.output = args.out
    problems = config.validate()
    if problems:
        raise ConfigError(problems)
    results = run_experiment(config)
    path = emit_csv(results, config.output)
    print(f"wrote {sum(len(r.records) for r in results)} rows to {path}")
    print(format_summary(summarize(results, f=config.f, p=config.p)))
    return 0


def _cmd_summarize(args) -> int:
    records = load_csv(args.csv)
    summary = summarize(records, f=args.f, p=args.p)
    print(format_summary(summary))
    if args.plots:
        from .report import render_figures

        written = render_figures(records, args.plots, summary=summary, f=args.f, p=args.p)
        for path in written:
            print(f"figure: {path}")
    return 0


def _cmd_verify(args) -> int:
    from .acceptance import run_suite

    if args.suite != "acceptance":
        print(f"unknown suite {args.suite!r}; available: acceptance", file=sys.stderr)
        return 2
    only = None
    if args.only:
        only = {int(part) for part in args.only.split(",")}
    results = run_suite(only=only)
    failures = 0
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        failures += not result.passed
        print(f"[{result.number:2d}/10] {status} {result.name}: {result.detail}")
    print(f"{len(results) - failures}/{len(results)} criteria passed")
    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="byzsgd",
        description="Simulator of Byzantine fault-tolerant parallelized SGD",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment config")
    run_p.add_argument("config", help="path to a key-value experiment config")
    run_p.add_argument("--seed", type=int, help="override the master seed")
    run_p.add_argument("--trials", type=int, help="override the trial count")
    run_p.add_argument("--out", help="override the output CSV path")
    run_p.set_defaults(fn=_cmd_run)

    sum_p = sub.add_parser("summarize", help="aggregate a records CSV")
    sum_p.add_argument("csv", help="records CSV written by `run`")
    sum_p.add_argument("--f", type=int, help="fault budget, enables bound comparisons")
    sum_p.add_argument("--p", type=float, help="tamper probability, enables the faulty-rate prediction")
    sum_p.add_argument("--plots", metavar="DIR", help="render figures into DIR")
    sum_p.set_defaults(fn=_cmd_summarize)

    ver_p = sub.add_parser("verify", help="run the acceptance suite")
    ver_p.add_argument("suite", nargs="?", default="acceptance")
    ver_p.add_argument("--only", help="comma-separated criterion numbers, e.g. 7,9")
    ver_p.set_defaults(fn=_cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    except InvariantViolation as exc:
        print(f"internal invariant violated: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
