"""Command-line entry point: ``nnreach {analyze,compare,theory,arm-demo}``.

Exit codes: 0 success, 1 theory mismatch, 2 usage error, 3 engine error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .errors import ReachError
from .geometry import Shape
from .harness import (
    CompareSpec,
    arm_demo,
    arm_network,
    format_arm_table,
    parse_box,
    rows_to_csv,
    run_compare,
    theory_sweep,
    truth_seed,
    TRUTH_SAMPLES,
)
from .network import load_network, truth_samples
from .partition import AnalyzerConfig, Partitioner, analyze
from .propagators import Propagator
from .report import build_report, write_text_atomic

log = logging.getLogger("nnreach")

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_ENGINE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _configure_logging():
    level = os.environ.get("REACH_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def _positive_int(text):
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _box_arg(text):
    try:
        return parse_box(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nnreach", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"nnreach {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="bound the output set of one network over an input box")
    p.add_argument("--net", required=True, type=Path)
    p.add_argument("--input-box", required=True, type=_box_arg)
    p.add_argument("--propagator", choices=[v.value for v in Propagator], default="crown")
    p.add_argument("--partitioner", choices=[v.value for v in Partitioner], default="gsg")
    p.add_argument("--shape", choices=[v.value for v in Shape], default="linf-ball")
    p.add_argument("--uniform-k", type=_positive_int, default=1)
    p.add_argument("--samples", type=_positive_int, default=1000)
    p.add_argument("--eps", type=_positive_float)
    p.add_argument("--budget-calls", type=_positive_int)
    p.add_argument("--budget-time-ms", type=_positive_int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--truth-samples", type=_positive_int, default=TRUTH_SAMPLES)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--svg", type=Path)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("compare", help="sweep propagator x partitioner pairs over seeds and budgets")
    p.add_argument("spec", type=Path)
    p.add_argument("--out", required=True, type=Path, help="CSV output")
    p.add_argument("--svg", type=Path, help="error-vs-calls chart")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("theory", help="verify the split volume-reduction formula against brute force")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dims", default="2,3,4")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("arm-demo", help="compare methods on the two-link arm surrogate")
    p.add_argument("--budget-calls", type=_positive_int, default=600)
    p.add_argument("--seed", type=int, default=3)
    p.add_argument("--net-cache", type=Path)
    p.add_argument("--out", type=Path, help="CSV table")
    p.add_argument("--svg-dir", type=Path)
    p.set_defaults(func=cmd_arm_demo)
    return parser


def cmd_analyze(args) -> int:
    if args.seed < 0:
        raise UsageError("--seed must be non-negative")
    try:
        net = load_network(args.net)
    except OSError as exc:
        raise UsageError(f"cannot read --net: {exc}") from exc
    try:
        cfg = AnalyzerConfig(
            propagator=args.propagator,
            partitioner=args.partitioner,
            shape=args.shape,
            num_samples=args.samples,
            sample_seed=args.seed,
            eps=args.eps,
            budget_calls=args.budget_calls,
            budget_time_ms=args.budget_time_ms,
            uniform_k=args.uniform_k,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    box = args.input_box
    result = analyze(net, box, cfg)
    truth = truth_samples(net, box, args.truth_samples, truth_seed(args.seed))
    report = build_report(cfg, box, result, truth, network={"path": str(args.net), "sizes": net.sizes})
    if args.svg is not None:
        from .plots import render_svg

        render_svg(result, truth, args.svg, title=f"{cfg.partitioner.value.upper()} + {cfg.propagator.value}")
    report.write(args.out)
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        data = json.loads(args.spec.read_text())
        spec = CompareSpec.from_dict(data, args.spec.parent)
    except (OSError, ValueError, TypeError, KeyError) as exc:
        raise UsageError(f"invalid compare spec: {exc}") from exc
    rows = run_compare(spec)
    if args.svg is not None:
        from .plots import render_tradeoff

        render_tradeoff(rows, args.svg)
    write_text_atomic(args.out, rows_to_csv(rows))
    return EXIT_OK


def cmd_theory(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    try:
        dims = [int(d) for d in args.dims.split(",") if d.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --dims: {exc}") from exc
    if not dims or any(d < 1 for d in dims):
        raise UsageError("--dims needs positive integers")
    report = theory_sweep(args.trials, args.seed, dims)
    text = json.dumps(report, indent=2) + "\n"
    if args.out is not None:
        write_text_atomic(args.out, text)
    else:
        sys.stdout.write(text)
    if not report["passed"]:
        dump = report["failing"][:1] or [report["checks"]]
        print("theory check failed; first failure:", json.dumps(dump[0]), file=sys.stderr)
        return EXIT_MISMATCH
    return EXIT_OK


def cmd_arm_demo(args) -> int:
    net = arm_network(args.seed, args.net_cache)
    rows, results, truth = arm_demo(args.budget_calls, args.seed, net)
    sys.stdout.write(format_arm_table(rows))
    if args.svg_dir is not None:
        from .plots import render_hull_overlay

        args.svg_dir.mkdir(parents=True, exist_ok=True)
        scored = [r for r in rows if r["error"] is not None]
        worst = max(scored, key=lambda r: r["error"])
        best = min(scored, key=lambda r: r["error"])
        for tag, row in (("worst", worst), ("best", best)):
            key = (row["propagator"], row["partitioner"])
            render_hull_overlay(results[key], truth, args.svg_dir / f"arm_{tag}.svg",
                                title=f"{row['partitioner'].upper()}-{row['propagator']}: error {row['error']:.3f}")
    if args.out is not None:
        import csv
        import io

        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        write_text_atomic(args.out, buf.getvalue())
    return EXIT_OK


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"nnreach {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ReachError, ValueError, ArithmeticError) as exc:
        print(f"nnreach {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ENGINE


if __name__ == "__main__":
    sys.exit(main())
