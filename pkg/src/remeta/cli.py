"""Command-line entry point: ``remeta analyze`` and ``remeta simulate``."""

import argparse
import sys

from .errors import MetaAnalysisError
from .heterogeneity import Estimator
from .inference import analyze
from .io import read_study_csv
from .report import estimator_choices, render_forest, render_json, render_table, simulation_csv
from .simulation import DEFAULT_I2, DEFAULT_REPS, SCENARIOS, run_grid


def _alpha(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError("alpha must lie strictly inside (0, 1)")
    return value


def _k_range(text):
    """``3`` or ``2..11`` (inclusive)."""
    try:
        if ".." in text:
            lo, hi = (int(part) for part in text.split("..", 1))
        else:
            lo = hi = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected <k> or <min>..<max>, got {text!r}") from None
    if lo < 2 or hi < lo:
        raise argparse.ArgumentTypeError("k values must satisfy 2 <= min <= max")
    return list(range(lo, hi + 1))


def _scenarios(text):
    items = [s.strip().upper() for s in text.split(",") if s.strip()]
    bad = [s for s in items if s not in SCENARIOS]
    if bad or not items:
        raise argparse.ArgumentTypeError(f"scenarios must be drawn from {','.join(SCENARIOS)}")
    return items


def _i2_list(text):
    try:
        values = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None
    if not values or not all(0.0 <= v < 1.0 for v in values):
        raise argparse.ArgumentTypeError("I^2 values must lie in [0, 1)")
    return values


def _estimators(text):
    try:
        items = [Estimator.parse(s) for s in text.split(",") if s.strip()]
    except MetaAnalysisError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if not items:
        raise argparse.ArgumentTypeError("at least one estimator is required")
    return items


def _reps(text):
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 1 <= n < 2**32:
        raise argparse.ArgumentTypeError("reps must be a positive integer below 2**32")
    return n


def _seed(text):
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= n < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return n


def build_parser():
    parser = argparse.ArgumentParser(
        prog="remeta",
        description="Random-effects meta-analysis with normal, HKSJ and mKH intervals.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="analyze one CSV of study estimates")
    pa.add_argument("--input", required=True, help="CSV with header label,estimate,stderr")
    pa.add_argument("--estimator", default="dl", choices=estimator_choices(),
                    type=str.lower, help="heterogeneity estimator (default: dl)")
    pa.add_argument("--alpha", type=_alpha, default=0.05)
    pa.add_argument("--format", default="table", choices=["table", "json", "forest"])

    ps = sub.add_parser("simulate", help="run the coverage simulation grid")
    ps.add_argument("--scenarios", type=_scenarios, default=list(SCENARIOS))
    ps.add_argument("--k", type=_k_range, default=list(range(2, 12)),
                    help="<k> or <min>..<max> (default: 2..11)")
    ps.add_argument("--i2", type=_i2_list, default=list(DEFAULT_I2),
                    help="comma-separated I^2 values (default: 0,0.25,0.5,0.75,0.9)")
    ps.add_argument("--estimators", type=_estimators, default=list(Estimator),
                    help="comma-separated subset of dl,reml,pm (default: all)")
    ps.add_argument("--alpha", type=_alpha, default=0.05)
    ps.add_argument("--reps", type=_reps, default=DEFAULT_REPS)
    ps.add_argument("--seed", type=_seed, default=0)
    ps.add_argument("--workers", type=int, default=1,
                    help="worker processes; output does not depend on this")
    ps.add_argument("--out", required=True, help="output CSV path")
    return parser


def cmd_analyze(args, stdout=sys.stdout, stderr=sys.stderr):
    try:
        data = read_study_csv(args.input)
        result = analyze(data, args.estimator, args.alpha)
        if args.format == "json":
            text = render_json(result)
        elif args.format == "forest":
            text = render_forest(data, result)
        else:
            text = render_table(result)
    except (OSError, MetaAnalysisError) as exc:
        print(f"remeta analyze: {exc}", file=stderr)
        return 1
    stdout.write(text)
    return 0


def cmd_simulate(args, stdout=sys.stdout, stderr=sys.stderr):
    results = run_grid(args.scenarios, args.k, args.i2, args.estimators,
                       args.alpha, args.reps, args.seed, workers=args.workers)
    text = simulation_csv(results)
    try:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        print(f"remeta simulate: cannot write {args.out}: {exc}", file=stderr)
        return 1
    status = 0
    for res in results:
        where = f"{res.cell.spec.scenario} k={res.cell.spec.k} i2={res.cell.i2:g}"
        if not res.ok:
            print(f"remeta simulate: cell {where} failed: {res.error}", file=stderr)
            status = 1
            continue
        for s in res.summaries:
            if s.n_failed:
                print(f"remeta simulate: cell {where} {s.estimator.value}: "
                      f"{s.n_failed} replicates did not converge (excluded)", file=stderr)
    n_rows = text.count("\n") - 1
    print(f"wrote {n_rows} rows to {args.out}", file=stderr)
    return status


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "analyze":
        return cmd_analyze(args)
    return cmd_simulate(args)


if __name__ == "__main__":
    sys.exit(main())
