# app/services/evaluation.py
import math
from typing import Dict, List, Mapping, NamedTuple, Sequence

import numpy as np
import structlog

from app.schemas.evaluation import (
    BBox,
    ClassMetrics,
    DeltaRow,
    Detection,
    EvalConfig,
    EvalReport,
    GroundTruthBox,
    Interpolation,
    MatchOutcome,
    PRCurve,
    PRPoint,
    ReportComparison,
)
from app.utils.exceptions import (
    AnnotationParseException,
    EmptyGroundTruthException,
    IncomparableReportsException,
    InvalidInputException,
)

logger = structlog.get_logger()

RECALL_LEVELS = [i / 10 for i in range(11)]


class IoUResult(NamedTuple):
    value: float
    degenerate: bool


def iou_checked(a: BBox, b: BBox) -> IoUResult:
    """IoU of two boxes, flagging zero-area input instead of dividing by zero."""
    area_a, area_b = a.area, b.area
    if area_a <= 0.0 or area_b <= 0.0:
        return IoUResult(0.0, True)

    ax1, ay1, ax2, ay2 = a.corners()
    bx1, by1, bx2, by2 = b.corners()
    iw = max(min(ax2, bx2) - max(ax1, bx1), 0.0)
    ih = max(min(ay2, by2) - max(ay1, by1), 0.0)
    inter = iw * ih
    union = area_a + area_b - inter
    return IoUResult(min(inter / union, 1.0), False)


def iou(a: BBox, b: BBox) -> float:
    """IoU in [0, 1]; logs a warning and returns 0 for a degenerate box."""
    result = iou_checked(a, b)
    if result.degenerate:
        logger.warning("degenerate_box_iou", a=a.model_dump(), b=b.model_dump())
    return result.value


def f1(p: float, r: float) -> float:
    """Harmonic mean of precision and recall, 0 when both are 0."""
    if p + r == 0:
        return 0.0
    return 2 * p * r / (p + r)


class EvaluationService:
    """Greedy IoU matching, PR curves, AP and report comparison."""

    def match_detections(
        self,
        detections: Sequence[Detection],
        ground_truths: Sequence[GroundTruthBox],
        threshold: float,
    ) -> MatchOutcome:
        """
        Greedy one-to-one matching in descending confidence.

        Each detection claims the unmatched same-class ground truth with the
        highest IoU; it is a true positive when that IoU reaches `threshold`.
        """
        if not 0.0 < threshold < 1.0:
            raise InvalidInputException(f"IoU threshold {threshold} outside (0, 1)")

        # stable sort: confidence ties keep input order
        order = sorted(range(len(detections)), key=lambda i: -detections[i].confidence)
        true_positive = [False] * len(detections)
        gt_matched = [False] * len(ground_truths)

        for d in order:
            det = detections[d]
            best, best_iou = -1, -1.0
            for g, gt in enumerate(ground_truths):
                if gt_matched[g] or gt.class_id != det.class_id:
                    continue
                overlap = iou_checked(det.box, gt.box).value
                # strict '>' keeps the lowest index on IoU ties
                if overlap > best_iou:
                    best, best_iou = g, overlap
            if best >= 0 and best_iou >= threshold:
                true_positive[d] = True
                gt_matched[best] = True

        return MatchOutcome(
            detections=list(detections),
            ground_truths=list(ground_truths),
            true_positive=true_positive,
            gt_matched=gt_matched,
            iou_threshold=threshold,
        )

    def precision_recall_curve(
        self, outcomes: Sequence[MatchOutcome], class_id: int
    ) -> PRCurve:
        """Cumulative P/R over class detections in descending confidence (stable across images)."""
        support = sum(
            1 for o in outcomes for gt in o.ground_truths if gt.class_id == class_id
        )
        if support == 0:
            return PRCurve(class_id=class_id, support=0)

        swept = [
            (det.confidence, hit)
            for o in outcomes
            for det, hit in zip(o.detections, o.true_positive)
            if det.class_id == class_id
        ]
        swept.sort(key=lambda item: -item[0])

        points: List[PRPoint] = []
        tp = fp = 0
        for confidence, hit in swept:
            if hit:
                tp += 1
            else:
                fp += 1
            points.append(PRPoint(
                recall=tp / support,
                precision=tp / (tp + fp),
                confidence=confidence,
            ))
        return PRCurve(class_id=class_id, support=support, points=points)

    def ap11(self, curve: PRCurve) -> float:
        """Mean interpolated precision at recall 0, 0.1, ..., 1."""
        if not curve.points:
            return 0.0
        recall = np.array([p.recall for p in curve.points])
        precision = np.array([p.precision for p in curve.points])
        ap = 0.0
        for level in RECALL_LEVELS:
            mask = recall >= level
            ap += float(precision[mask].max()) if mask.any() else 0.0
        return ap / 11

    def ap_all_point(self, curve: PRCurve) -> float:
        """Area under the monotone precision envelope (VOC2010+ rule)."""
        if not curve.points:
            return 0.0
        mrec = np.concatenate(([0.0], [p.recall for p in curve.points], [1.0]))
        mpre = np.concatenate(([0.0], [p.precision for p in curve.points], [0.0]))
        for i in range(mpre.size - 1, 0, -1):
            mpre[i - 1] = max(mpre[i - 1], mpre[i])
        i = np.where(mrec[1:] != mrec[:-1])[0]
        return float(np.sum((mrec[i + 1] - mrec[i]) * mpre[i + 1]))

    def average_precision(self, curve: PRCurve, mode: Interpolation) -> float:
        if mode == Interpolation.ALL_POINT:
            return self.ap_all_point(curve)
        return self.ap11(curve)

    def evaluate(
        self,
        predictions: Mapping[str, Sequence[Detection]],
        ground_truths: Mapping[str, Sequence[GroundTruthBox]],
        cfg: EvalConfig,
    ) -> EvalReport:
        """
        Score a prediction set against ground truth over every IoU threshold.

        Args:
            predictions: Detections per image key; keys must exist in `ground_truths`
            ground_truths: Boxes per image key; images without boxes still count
            cfg: Class count and names, IoU thresholds, interpolation, reference confidence

        Returns:
            EvalReport with per-class AP, mAP per threshold and counts at IoU 0.5

        Raises:
            InvalidInputException: unknown image keys or class ids outside the class range
            EmptyGroundTruthException: no ground-truth box at all
        """
        unknown = sorted(set(predictions) - set(ground_truths))
        if unknown:
            raise InvalidInputException(
                f"predictions for images without ground truth: {unknown[:5]}")

        images = sorted(ground_truths)
        num_gt = sum(len(ground_truths[k]) for k in images)
        if num_gt == 0:
            raise EmptyGroundTruthException()
        self._check_class_range(predictions, ground_truths, cfg.num_classes)

        names = cfg.names()
        ap_table: Dict[int, List[float]] = {c: [] for c in range(cfg.num_classes)}
        supports: Dict[int, int] = {}
        map_per_threshold: List[float] = []

        for t in cfg.iou_thresholds:
            outcomes = [
                self.match_detections(predictions.get(k, []), ground_truths[k], t)
                for k in images
            ]
            aps = []
            for c in range(cfg.num_classes):
                curve = self.precision_recall_curve(outcomes, c)
                supports[c] = curve.support
                if curve.zero_support:
                    continue
                ap = self.average_precision(curve, cfg.interpolation)
                ap_table[c].append(ap)
                aps.append(ap)
            # no ground truth inside the class range: nothing to average
            map_per_threshold.append(math.fsum(aps) / len(aps) if aps else 0.0)

        per_class = [
            ClassMetrics(
                class_id=c,
                name=names[c],
                support=supports[c],
                ap=ap_table[c] if supports[c] > 0 else None,
            )
            for c in range(cfg.num_classes)
        ]
        zero = [m.name for m in per_class if m.zero_support]
        if zero:
            logger.info("zero_support_classes", classes=zero)

        # reference operating point: IoU 0.5, detections at or above the confidence cut
        tp = fp = fn = 0
        for k in images:
            kept = [d for d in predictions.get(k, []) if d.confidence >= cfg.reference_confidence]
            outcome = self.match_detections(kept, ground_truths[k], 0.5)
            tp, fp, fn = tp + outcome.tp, fp + outcome.fp, fn + outcome.fn
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0

        map50 = None
        for t, m in zip(cfg.iou_thresholds, map_per_threshold):
            if math.isclose(t, 0.5):
                map50 = m

        report = EvalReport(
            class_names=names,
            iou_thresholds=list(cfg.iou_thresholds),
            interpolation=cfg.interpolation,
            reference_confidence=cfg.reference_confidence,
            num_images=len(images),
            num_ground_truths=num_gt,
            num_detections=sum(len(v) for v in predictions.values()),
            per_class=per_class,
            map_per_threshold=map_per_threshold,
            map50=map50,
            map50_95=math.fsum(map_per_threshold) / len(map_per_threshold),
            precision=precision,
            recall=recall,
            f1=f1(precision, recall),
            tp=tp,
            fp=fp,
            fn=fn,
        )

        logger.info(
            "evaluation_complete",
            images=report.num_images,
            ground_truths=num_gt,
            map50=map50,
            map50_95=round(report.map50_95, 6),
        )
        return report

    def _check_class_range(
        self,
        predictions: Mapping[str, Sequence[Detection]],
        ground_truths: Mapping[str, Sequence[GroundTruthBox]],
        num_classes: int,
    ) -> None:
        for kind, table in (("ground truth", ground_truths), ("prediction", predictions)):
            for key in sorted(table):
                for item in table[key]:
                    if item.class_id >= num_classes:
                        raise InvalidInputException(
                            f"{kind} class {item.class_id} in image '{key}' "
                            f"outside 0..{num_classes - 1}")

    def compare_reports(
        self, baseline: EvalReport, other: EvalReport, decimals: int = 3
    ) -> ReportComparison:
        """Per-metric drop rows (baseline minus other), rounded to `decimals`."""
        if baseline.class_names != other.class_names:
            raise IncomparableReportsException(
                f"class lists differ: {baseline.class_names} vs {other.class_names}")
        if len(baseline.iou_thresholds) != len(other.iou_thresholds) or not all(
            math.isclose(a, b) for a, b in zip(baseline.iou_thresholds, other.iou_thresholds)
        ):
            raise IncomparableReportsException("IoU thresholds differ")

        pairs = [
            ("mAP@0.5:0.95", baseline.map50_95, other.map50_95),
            ("mAP@0.5", baseline.map50, other.map50),
            ("precision", baseline.precision, other.precision),
            ("recall", baseline.recall, other.recall),
            ("f1", baseline.f1, other.f1),
        ]
        for a, b in zip(baseline.per_class, other.per_class):
            pairs.append((f"AP@0.5:0.95 {a.name}", a.ap50_95, b.ap50_95))

        rows = [
            DeltaRow(
                metric=metric,
                baseline=round(x, decimals),
                other=round(y, decimals),
                dropped=round(x - y, decimals),
            )
            for metric, x, y in pairs
            if x is not None and y is not None
        ]
        return ReportComparison(rows=rows, decimals=decimals)

    def class_gap(self, report: EvalReport, a: int, b: int) -> float:
        """Absolute AP@0.5:0.95 difference between two classes; the smaller, the more balanced."""
        ap_a, ap_b = report.per_class[a].ap50_95, report.per_class[b].ap50_95
        if ap_a is None or ap_b is None:
            raise InvalidInputException("class gap needs ground truth for both classes")
        return abs(ap_a - ap_b)

    def parse_ground_truth(self, text: str, num_classes: int) -> List[GroundTruthBox]:
        """Lines `class_id cx cy w h`."""
        boxes = []
        for n, fields in _numeric_lines(text, 5):
            class_id = _class_id(n, fields[0], num_classes)
            boxes.append(GroundTruthBox(class_id=class_id, box=_bbox(n, fields[1:])))
        return boxes

    def parse_predictions(self, text: str, num_classes: int) -> List[Detection]:
        """Lines `class_id confidence cx cy w h`."""
        dets = []
        for n, fields in _numeric_lines(text, 6):
            class_id = _class_id(n, fields[0], num_classes)
            if not 0.0 <= fields[1] <= 1.0:
                raise AnnotationParseException(n, f"confidence {fields[1]} outside [0, 1]")
            dets.append(Detection(class_id=class_id, confidence=fields[1], box=_bbox(n, fields[2:])))
        return dets


def _numeric_lines(text: str, width: int):
    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != width:
            raise AnnotationParseException(n, f"expected {width} fields, got {len(parts)}")
        try:
            yield n, [float(p) for p in parts]
        except ValueError:
            raise AnnotationParseException(n, f"non-numeric field in '{line.strip()}'")


def _class_id(n: int, value: float, num_classes: int) -> int:
    if not math.isfinite(value) or value != int(value):
        raise AnnotationParseException(n, f"class id {value} is not an integer")
    class_id = int(value)
    if not 0 <= class_id < num_classes:
        raise AnnotationParseException(n, f"class {class_id} of {num_classes}")
    return class_id


def _bbox(n: int, values: List[float]) -> BBox:
    cx, cy, w, h = values
    for name, v in (("cx", cx), ("cy", cy), ("w", w), ("h", h)):
        if not 0.0 <= v <= 1.0:
            raise AnnotationParseException(n, f"{name}={v} outside [0, 1]")
    if w <= 0.0 or h <= 0.0:
        raise AnnotationParseException(n, "box width and height must be positive")
    return BBox(cx=cx, cy=cy, w=w, h=h)


evaluation_service = EvaluationService()
