# app/cli/commands/compare.py
import argparse
from pathlib import Path

from app.cli.dependencies import positive_int_arg
from app.schemas.evaluation import EvalReport
from app.services.evaluation import evaluation_service
from app.utils.file_handler import file_handler


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "compare",
        help="Metric drops between two evaluation reports",
        description="dropped = baseline - other, each value rounded to --decimals.",
    )
    parser.add_argument("baseline", type=Path, help="baseline report JSON (e.g. Dataset 1 model)")
    parser.add_argument("other", type=Path, help="report JSON to compare against the baseline")
    parser.add_argument("--decimals", type=positive_int_arg, default=3, help="rounding digits")
    parser.add_argument("--out", type=Path, help="CSV output")
    parser.set_defaults(handler=compare_reports)


def compare_reports(args: argparse.Namespace) -> int:
    baseline = EvalReport.model_validate_json(file_handler.read_text(args.baseline))
    other = EvalReport.model_validate_json(file_handler.read_text(args.other))
    comparison = evaluation_service.compare_reports(baseline, other, decimals=args.decimals)

    d = args.decimals
    print(f"{'metric':<28} {'baseline':>9} {'other':>9} {'dropped':>9}")
    for r in comparison.rows:
        print(f"{r.metric:<28} {r.baseline:>9.{d}f} {r.other:>9.{d}f} {r.dropped:>9.{d}f}")

    if args.out:
        file_handler.write_csv(
            args.out,
            ["metric", "baseline", "other", "dropped"],
            ([r.metric, f"{r.baseline:.{d}f}", f"{r.other:.{d}f}", f"{r.dropped:.{d}f}"]
             for r in comparison.rows),
        )
    return 0
