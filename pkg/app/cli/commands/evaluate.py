# app/cli/commands/evaluate.py
import argparse
import math
from pathlib import Path
from typing import List

import structlog

from app.cli.dependencies import fraction_arg, get_settings_dependency, iou_range_arg, names_arg
from app.schemas.dataset import GestureClass
from app.schemas.evaluation import EvalConfig, EvalReport, Interpolation, default_iou_thresholds
from app.services.evaluation import evaluation_service
from app.utils.exceptions import InvalidInputException, UsageException
from app.utils.file_handler import file_handler
from app.utils.plots import pr_curve

logger = structlog.get_logger()


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser(
        "eval",
        help="Score YOLO-format predictions against ground truth",
        description="Per-class AP, mAP@0.5, mAP@0.5:0.95 and P/R/F1 at the reference confidence.",
    )
    parser.add_argument("--gt", type=Path, required=True,
                        help="directory of ground-truth txt files (class cx cy w h)")
    parser.add_argument("--pred", type=Path, required=True,
                        help="directory of prediction txt files (class conf cx cy w h)")
    parser.add_argument("--classes", type=names_arg, default=None,
                        help="comma-separated class names (default: the five gestures)")
    parser.add_argument("--iou", type=iou_range_arg, default=None,
                        help="IoU thresholds as a:b:step (default 0.5:0.95:0.05)")
    parser.add_argument("--conf", type=fraction_arg, default=None,
                        help="confidence cut for precision/recall/F1")
    parser.add_argument("--interp", choices=[m.value for m in Interpolation],
                        default=Interpolation.ELEVEN_POINT.value, help="AP interpolation")
    parser.add_argument("--name", default="model", help="model name for the CSV row")
    parser.add_argument("--out", type=Path, help="report JSON output")
    parser.add_argument("--csv", type=Path, help="one-row summary CSV output")
    parser.add_argument("--pr-curves", type=Path, help="directory for per-class PR curve SVGs")
    parser.add_argument("--pair", type=names_arg, default=None,
                        help="two class names or ids; prints their AP@0.5:0.95 gap")
    parser.set_defaults(handler=run_evaluation)


def summary_row(name: str, report: EvalReport) -> List[str]:
    values = [report.precision, report.recall, report.f1, report.map50, report.map50_95]
    values += [m.ap50_95 for m in report.per_class]
    return [name] + ["" if v is None else f"{v:.3f}" for v in values]


def summary_header(report: EvalReport) -> List[str]:
    return ["model", "precision", "recall", "f1", "mAP@0.5", "mAP@0.5:0.95"] + [
        f"AP@0.5:0.95 {n}" for n in report.class_names
    ]


def _class_index(token: str, names: List[str]) -> int:
    if token.isdigit() and int(token) < len(names):
        return int(token)
    key = token.strip().lower().replace(" ", "_")
    for i, n in enumerate(names):
        if n.lower().replace(" ", "_") == key:
            return i
    raise InvalidInputException(f"unknown class '{token}' (known: {names})")


def run_evaluation(args: argparse.Namespace) -> int:
    settings = get_settings_dependency()
    names = args.classes or GestureClass.names()
    cfg = EvalConfig(
        iou_thresholds=args.iou or default_iou_thresholds(),
        num_classes=len(names),
        class_names=names,
        reference_confidence=settings.reference_confidence if args.conf is None else args.conf,
        interpolation=Interpolation(args.interp),
    )

    gt_text = file_handler.read_label_dir(args.gt)
    pred_text = file_handler.read_label_dir(args.pred)
    ground_truths = {k: evaluation_service.parse_ground_truth(v, cfg.num_classes)
                     for k, v in gt_text.items()}
    predictions = {k: evaluation_service.parse_predictions(v, cfg.num_classes)
                   for k, v in pred_text.items()}

    report = evaluation_service.evaluate(predictions, ground_truths, cfg)

    print(f"images={report.num_images} gt={report.num_ground_truths} "
          f"detections={report.num_detections}")
    i50 = next((i for i, t in enumerate(cfg.iou_thresholds) if math.isclose(t, 0.5)), None)
    print(f"{'class':<14} {'support':>8} {'AP@0.5':>8} {'AP@.5:.95':>10}")
    for m in report.per_class:
        if m.zero_support:
            print(f"{m.name:<14} {0:>8} {'-':>8} {'-':>10}")
            continue
        ap50 = "-" if i50 is None else f"{m.ap[i50]:.3f}"
        print(f"{m.name:<14} {m.support:>8} {ap50:>8} {m.ap50_95:>10.3f}")
    map50 = "-" if report.map50 is None else f"{report.map50:.3f}"
    print(f"mAP@0.5={map50} mAP@0.5:0.95={report.map50_95:.3f} "
          f"P={report.precision:.3f} R={report.recall:.3f} F1={report.f1:.3f}")

    if args.pair:
        if len(args.pair) != 2:
            raise UsageException("--pair needs exactly two classes")
        a, b = (_class_index(t, names) for t in args.pair)
        gap = evaluation_service.class_gap(report, a, b)
        print(f"gap {names[a]}/{names[b]}: {gap:.3f}")

    if args.out:
        file_handler.write_json(args.out, report)
    if args.csv:
        file_handler.write_csv(args.csv, summary_header(report), [summary_row(args.name, report)])
    if args.pr_curves:
        threshold = cfg.iou_thresholds[0]
        outcomes = [
            evaluation_service.match_detections(predictions.get(k, []), ground_truths[k], threshold)
            for k in sorted(ground_truths)
        ]
        for m in report.per_class:
            if m.zero_support:
                continue
            curve = evaluation_service.precision_recall_curve(outcomes, m.class_id)
            ap = evaluation_service.average_precision(curve, cfg.interpolation)
            pr_curve(curve, f"{m.name} @ IoU {threshold:g}", ap,
                     args.pr_curves / f"pr_{m.class_id}_{m.name}.svg")

    logger.info("eval_command_complete", model=args.name)
    return 0
