# app/cli/commands/comply.py
import argparse
from pathlib import Path

from app.cli.dependencies import (
    fraction_arg,
    gesture_pair_arg,
    get_settings_dependency,
    odd_window_arg,
    positive_float_arg,
)
from app.schemas.compliance import ProtocolSpec
from app.services.compliance import compliance_service
from app.utils.file_handler import file_handler


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "comply",
        help="Audit a per-frame gesture sequence against an alternating-tap protocol",
        description="Exits 1 when the sequence does not comply.",
    )
    parser.add_argument("frames", type=Path, help="CSV frame,gesture[,confidence]")
    parser.add_argument("--expect", type=gesture_pair_arg, required=True,
                        help="instructed gesture pair, e.g. open,close")
    parser.add_argument("--fps", type=positive_float_arg, required=True, help="video frame rate")
    parser.add_argument("--min-transitions", type=int, default=None,
                        help="minimum a<->b transitions")
    parser.add_argument("--window", type=odd_window_arg, default=None, help="odd smoothing window")
    parser.add_argument("--max-missing", type=fraction_arg, default=None,
                        help="tolerated no-detection fraction")
    parser.add_argument("--out", type=Path, help="report JSON output")
    parser.set_defaults(handler=run_compliance)


def run_compliance(args: argparse.Namespace) -> int:
    settings = get_settings_dependency()
    protocol = ProtocolSpec(
        expected=args.expect,
        fps=args.fps,
        min_transitions=(settings.min_transitions if args.min_transitions is None
                         else args.min_transitions),
        window=settings.smoothing_window if args.window is None else args.window,
        max_no_detection=(settings.max_no_detection if args.max_missing is None
                          else args.max_missing),
    )
    frames = compliance_service.parse_frame_labels(file_handler.read_text(args.frames))
    report = compliance_service.check_alternation(frames, protocol)

    verdict = "compliant" if report.compliant else "NOT compliant"
    print(f"{verdict}: {report.transitions} transitions, "
          f"{report.tap_frequency:.2f} taps/s over {report.duration_seconds:.2f}s, "
          f"no detection {report.no_detection_fraction:.0%}")
    for reason in report.reasons:
        print(f"  - {reason}")

    if args.out:
        file_handler.write_json(args.out, report)
    return 0 if report.compliant else 1
