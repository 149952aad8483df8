# app/cli/commands/blur.py
import argparse
import sys
from pathlib import Path

import structlog

from app.cli.dependencies import get_settings_dependency, get_workers, positive_int_arg, thresholds_arg
from app.schemas.imaging import BlurThresholds
from app.services.imaging import blur_service
from app.utils.file_handler import file_handler
from app.utils.plots import blur_histogram

logger = structlog.get_logger()


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("blur", help="Laplace-mask blur scoring")
    actions = parser.add_subparsers(dest="action", required=True)

    score = actions.add_parser(
        "score",
        help="Score images and write path,score,category CSV",
        description="Blur score = population variance of the valid 3x3 Laplacian response.",
    )
    score.add_argument("paths", nargs="+", type=Path, help="image files or directories")
    score.add_argument("--out", type=Path, help="CSV output (default: stdout)")
    score.add_argument("--thresholds", type=thresholds_arg,
                       help="low,high category thresholds (default 10,50)")
    score.add_argument("--std", action="store_true",
                       help="also report the standard deviation (sqrt of the score)")
    score.add_argument("--histogram", type=Path, help="write a score histogram SVG")
    score.add_argument("--workers", type=positive_int_arg, help="parallel workers")
    score.set_defaults(handler=score_images)


def score_images(args: argparse.Namespace) -> int:
    settings = get_settings_dependency()
    thresholds = args.thresholds or BlurThresholds(low=settings.blur_low, high=settings.blur_high)

    paths = file_handler.list_images(args.paths)
    results = blur_service.score_paths(paths, thresholds, workers=get_workers(args))

    header = ["path", "score", "category"] + (["std"] if args.std else [])
    rows = []
    for path, record in results:
        row = [str(path), f"{record.score:.6f}", record.category.value]
        if args.std:
            row.append(f"{record.std:.6f}")
        rows.append(row)

    if args.out:
        file_handler.write_csv(args.out, header, rows)
    else:
        sys.stdout.write(file_handler.csv_text(header, rows))

    if args.histogram:
        blur_histogram([r.score for _, r in results], thresholds, args.histogram)

    logger.info("blur_command_complete", images=len(results))
    return 0
