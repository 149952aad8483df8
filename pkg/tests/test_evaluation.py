# tests/test_evaluation.py
import math

import numpy as np
import pytest
from pydantic import ValidationError

from app.schemas.evaluation import (
    BBox,
    ClassMetrics,
    EvalConfig,
    EvalReport,
    Interpolation,
    PRCurve,
    PRPoint,
    default_iou_thresholds,
)
from app.services.evaluation import evaluation_service, f1, iou, iou_checked
from app.utils.exceptions import (
    AnnotationParseException,
    EmptyGroundTruthException,
    IncomparableReportsException,
    InvalidInputException,
)
from tests.conftest import box, det, gt

NAMES = ["open", "close", "pinch_open", "pinch_close", "flip"]


def curve(*points) -> PRCurve:
    return PRCurve(
        class_id=0,
        support=1,
        points=[PRPoint(recall=r, precision=p, confidence=1.0) for r, p in points],
    )


# IoU

def test_iou_identity_and_disjoint():
    a = box(0.3, 0.3, 0.2, 0.2)
    assert iou(a, a) == 1.0
    assert iou(a, box(0.8, 0.8, 0.2, 0.2)) == 0.0


def test_iou_corner_boxes():
    # (0,0)-(2,2) and (1,1)-(3,3) on a 4x4 canvas
    a = BBox.from_corners(0, 0, 2, 2, 4, 4)
    b = BBox.from_corners(1, 1, 3, 3, 4, 4)
    assert iou(a, b) == pytest.approx(1 / 7, abs=1e-12)


def test_iou_is_symmetric_and_bounded():
    rng = np.random.default_rng(3)
    for _ in range(500):
        a, b = (box(*rng.uniform(0.0, 1.0, 2), *rng.uniform(0.01, 1.0, 2)) for _ in range(2))
        assert iou(a, b) == iou(b, a)
        assert 0.0 <= iou(a, b) <= 1.0


def test_iou_half_overlap():
    assert iou(box(0.25, 0.5, 0.5, 1.0), box(0.5, 0.5, 0.5, 1.0)) == pytest.approx(1 / 3)


def test_degenerate_box_is_flagged():
    flat = BBox.model_construct(cx=0.5, cy=0.5, w=0.0, h=0.2)
    result = iou_checked(flat, box(0.5, 0.5, 0.2, 0.2))
    assert result.value == 0.0
    assert result.degenerate
    assert iou(flat, flat) == 0.0


def test_bbox_rejects_out_of_range():
    with pytest.raises(ValidationError):
        BBox(cx=1.2, cy=0.5, w=0.1, h=0.1)
    with pytest.raises(ValidationError):
        BBox(cx=0.5, cy=0.5, w=0.0, h=0.1)


# Matching

def test_exact_match():
    outcome = evaluation_service.match_detections(
        [det(0, 0.9, 0.5, 0.5, 0.2, 0.2)], [gt(0, 0.5, 0.5, 0.2, 0.2)], 0.5)
    assert (outcome.tp, outcome.fp, outcome.fn, outcome.tn) == (1, 0, 0, 0)


def test_duplicate_detection_is_false_positive():
    dets = [det(0, 0.8, 0.5, 0.5, 0.2, 0.2), det(0, 0.9, 0.51, 0.5, 0.2, 0.2)]
    outcome = evaluation_service.match_detections(dets, [gt(0, 0.5, 0.5, 0.2, 0.2)], 0.5)
    # input order is kept; the 0.9 detection claims the box
    assert outcome.true_positive == [False, True]
    assert (outcome.tp, outcome.fp, outcome.fn) == (1, 1, 0)


def test_class_mismatch_never_matches():
    outcome = evaluation_service.match_detections(
        [det(1, 0.9, 0.5, 0.5, 0.2, 0.2)], [gt(2, 0.5, 0.5, 0.2, 0.2)], 0.5)
    assert (outcome.tp, outcome.fp, outcome.fn) == (0, 1, 1)


def test_threshold_is_inclusive():
    # IoU is exactly 0.5
    ground = [gt(0, 0.5, 0.5, 1.0, 1.0)]
    detection = [det(0, 0.9, 0.25, 0.5, 0.5, 1.0)]
    assert evaluation_service.match_detections(detection, ground, 0.5).tp == 1
    assert evaluation_service.match_detections(detection, ground, 0.55).tp == 0


def test_best_iou_ground_truth_is_claimed():
    ground = [gt(0, 0.4, 0.5, 0.2, 0.2), gt(0, 0.5, 0.5, 0.2, 0.2)]
    outcome = evaluation_service.match_detections([det(0, 0.9, 0.5, 0.5, 0.2, 0.2)], ground, 0.3)
    assert outcome.gt_matched == [False, True]


def test_empty_inputs_and_bad_threshold():
    outcome = evaluation_service.match_detections([], [], 0.5)
    assert (outcome.tp, outcome.fp, outcome.fn) == (0, 0, 0)
    with pytest.raises(InvalidInputException):
        evaluation_service.match_detections([], [], 1.0)


# Curves and AP

def test_precision_recall_curve_examples():
    ground = [gt(0, 0.5, 0.5, 0.2, 0.2)]
    outcome = evaluation_service.match_detections(
        [det(0, 0.9, 0.5, 0.5, 0.2, 0.2), det(0, 0.8, 0.1, 0.1, 0.1, 0.1)], ground, 0.5)
    pr = evaluation_service.precision_recall_curve([outcome], 0)
    assert [(p.recall, p.precision) for p in pr.points] == [(1.0, 1.0), (1.0, 0.5)]

    miss = evaluation_service.match_detections([det(0, 0.9, 0.1, 0.1, 0.1, 0.1)], ground, 0.5)
    pr = evaluation_service.precision_recall_curve([miss], 0)
    assert [(p.recall, p.precision) for p in pr.points] == [(0.0, 0.0)]


def test_zero_support_curve():
    outcome = evaluation_service.match_detections(
        [det(1, 0.9, 0.5, 0.5, 0.2, 0.2)], [gt(0, 0.5, 0.5, 0.2, 0.2)], 0.5)
    pr = evaluation_service.precision_recall_curve([outcome], 1)
    assert pr.zero_support
    assert pr.points == []
    assert evaluation_service.ap11(pr) == 0.0


def test_ap11_examples():
    assert evaluation_service.ap11(curve((1, 1))) == pytest.approx(1.0)
    assert evaluation_service.ap11(curve((0, 0))) == 0.0
    assert evaluation_service.ap11(curve((1, 1), (1, 0.5))) == pytest.approx(1.0)
    assert evaluation_service.ap11(curve((0, 0), (1, 0.5))) == pytest.approx(0.5)


def test_ap_interpolation_modes():
    c = curve((0.5, 1.0), (0.5, 0.5), (1.0, 2 / 3))
    assert evaluation_service.ap11(c) == pytest.approx(28 / 33)
    assert evaluation_service.ap_all_point(c) == pytest.approx(5 / 6)
    assert evaluation_service.average_precision(c, Interpolation.ALL_POINT) == pytest.approx(5 / 6)


# F1

def test_f1_examples():
    assert f1(0.5, 0.5) == 0.5
    assert f1(0.0, 0.9) == 0.0
    assert f1(0.915, 0.901) == pytest.approx(0.907946, abs=1e-6)


def test_f1_grid():
    grid = np.linspace(0, 1, 21)
    for p in grid:
        assert f1(0.0, p) == 0.0
        assert f1(p, 0.0) == 0.0
        assert f1(p, p) == pytest.approx(p)
        for r in grid:
            value = f1(p, r)
            assert value == pytest.approx(f1(r, p))
            assert min(p, r) - 1e-12 <= value <= max(p, r) + 1e-12


# evaluate

def test_perfect_predictions(scene):
    _, ground_truths = scene
    predictions = {
        k: [det(g.class_id, 0.9, g.box.cx, g.box.cy, g.box.w, g.box.h) for g in v]
        for k, v in ground_truths.items()
    }
    report = evaluation_service.evaluate(predictions, ground_truths, EvalConfig(class_names=NAMES))
    assert report.map50_95 == pytest.approx(1.0)
    assert report.map50 == pytest.approx(1.0)
    assert (report.precision, report.recall, report.f1) == (1.0, 1.0, 1.0)


def test_scene_report(scene):
    predictions, ground_truths = scene
    report = evaluation_service.evaluate(predictions, ground_truths, EvalConfig(class_names=NAMES))

    assert report.num_images == 2
    assert report.num_ground_truths == 4
    assert report.num_detections == 4
    assert (report.tp, report.fp, report.fn, report.tn) == (3, 1, 1, 0)
    assert report.precision == pytest.approx(0.75)
    assert report.recall == pytest.approx(0.75)

    supports = [m.support for m in report.per_class]
    assert supports == [2, 1, 1, 0, 0]
    assert report.per_class[3].ap is None
    assert report.per_class[4].ap is None
    # classes 0 and 1 are perfect, class 2 missed: mean over the three supported classes
    assert report.map50 == pytest.approx(2 / 3)
    assert report.map50_95 == pytest.approx(math.fsum(report.map_per_threshold) / 10)


def test_reference_confidence_filters_counts(scene):
    predictions, ground_truths = scene
    low = {k: [d.model_copy(update={"confidence": 0.2}) for d in v] for k, v in predictions.items()}
    report = evaluation_service.evaluate(low, ground_truths, EvalConfig(class_names=NAMES))
    assert (report.tp, report.fp, report.fn) == (0, 0, 4)
    assert report.f1 == 0.0
    # AP ignores the confidence cut
    assert report.map50 == pytest.approx(2 / 3)


def test_evaluate_errors(scene):
    predictions, ground_truths = scene
    with pytest.raises(InvalidInputException):
        evaluation_service.evaluate({"zzz": []}, ground_truths, EvalConfig())
    with pytest.raises(EmptyGroundTruthException):
        evaluation_service.evaluate({}, {"a": [], "b": []}, EvalConfig())


def test_class_ids_outside_the_range_are_rejected():
    ground_truths = {"a": [gt(7, 0.5, 0.5, 0.2, 0.2)]}
    with pytest.raises(InvalidInputException, match="ground truth class 7"):
        evaluation_service.evaluate({}, ground_truths, EvalConfig())
    with pytest.raises(InvalidInputException, match="prediction class 5"):
        evaluation_service.evaluate(
            {"a": [det(5, 0.9, 0.5, 0.5, 0.2, 0.2)]},
            {"a": [gt(0, 0.5, 0.5, 0.2, 0.2)]},
            EvalConfig(),
        )


def test_eval_config_validation():
    assert EvalConfig().iou_thresholds == default_iou_thresholds()
    assert default_iou_thresholds()[0] == 0.5 and default_iou_thresholds()[-1] == 0.95
    with pytest.raises(ValidationError):
        EvalConfig(iou_thresholds=[0.6, 0.5])
    with pytest.raises(ValidationError):
        EvalConfig(iou_thresholds=[0.5, 1.0])
    with pytest.raises(ValidationError):
        EvalConfig(num_classes=5, class_names=["a", "b"])


# Independent naive-loop reference

def naive_iou(a, b):
    def corners(bb):
        return (
            min(max(bb.cx - bb.w / 2, 0.0), 1.0),
            min(max(bb.cy - bb.h / 2, 0.0), 1.0),
            min(max(bb.cx + bb.w / 2, 0.0), 1.0),
            min(max(bb.cy + bb.h / 2, 0.0), 1.0),
        )

    ax1, ay1, ax2, ay2 = corners(a)
    bx1, by1, bx2, by2 = corners(b)
    area_a = max(ax2 - ax1, 0.0) * max(ay2 - ay1, 0.0)
    area_b = max(bx2 - bx1, 0.0) * max(by2 - by1, 0.0)
    iw = max(min(ax2, bx2) - max(ax1, bx1), 0.0)
    ih = max(min(ay2, by2) - max(ay1, by1), 0.0)
    inter = iw * ih
    return min(inter / (area_a + area_b - inter), 1.0)


def naive_match(dets, gts, t):
    hits = [False] * len(dets)
    used = [False] * len(gts)
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].confidence, i))
    for i in order:
        candidates = [
            (naive_iou(dets[i].box, gts[g].box), -g)
            for g in range(len(gts))
            if not used[g] and gts[g].class_id == dets[i].class_id
        ]
        if candidates:
            best, neg_g = max(candidates)
            if best >= t:
                hits[i] = True
                used[-neg_g] = True
    return hits, used


def naive_evaluate(predictions, ground_truths, thresholds, num_classes, conf):
    images = sorted(ground_truths)
    maps = []
    for t in thresholds:
        matched = {k: naive_match(predictions.get(k, []), ground_truths[k], t) for k in images}
        aps = []
        for c in range(num_classes):
            support = 0
            for k in images:
                for g in ground_truths[k]:
                    if g.class_id == c:
                        support += 1
            if support == 0:
                continue
            swept = []
            for k in images:
                for d, hit in zip(predictions.get(k, []), matched[k][0]):
                    if d.class_id == c:
                        swept.append((d.confidence, hit))
            swept.sort(key=lambda s: -s[0])
            recalls, precisions = [], []
            tp = fp = 0
            for _, hit in swept:
                if hit:
                    tp += 1
                else:
                    fp += 1
                recalls.append(tp / support)
                precisions.append(tp / (tp + fp))
            total = 0.0
            for i in range(11):
                level = i / 10
                best = 0.0
                for r, p in zip(recalls, precisions):
                    if r >= level and p > best:
                        best = p
                total += best
            aps.append(total / 11)
        maps.append(sum(aps) / len(aps))

    tp = fp = fn = 0
    for k in images:
        kept = [d for d in predictions.get(k, []) if d.confidence >= conf]
        hits, used = naive_match(kept, ground_truths[k], 0.5)
        tp += sum(hits)
        fp += len(hits) - sum(hits)
        fn += len(used) - sum(used)
    return maps, (tp, fp, fn)


def random_scene(rng):
    ground_truths, predictions = {}, {}
    for i in range(int(rng.integers(1, 6))):
        key = f"img{i}"
        gts = []
        for _ in range(int(rng.integers(0, 5))):
            w, h = rng.uniform(0.1, 0.4, 2)
            cx, cy = rng.uniform(0.2, 0.8, 2)
            gts.append(gt(int(rng.integers(0, 5)), cx, cy, w, h))
        dets = []
        for g in gts:
            if rng.random() < 0.8:
                jitter = rng.normal(0.0, 0.03, 2)
                cls = g.class_id if rng.random() < 0.9 else int(rng.integers(0, 5))
                dets.append(det(cls, round(float(rng.uniform(0.05, 1.0)), 2),
                                float(np.clip(g.box.cx + jitter[0], 0.2, 0.8)),
                                float(np.clip(g.box.cy + jitter[1], 0.2, 0.8)),
                                g.box.w, g.box.h))
        for _ in range(int(rng.integers(0, 3))):
            w, h = rng.uniform(0.1, 0.4, 2)
            cx, cy = rng.uniform(0.2, 0.8, 2)
            dets.append(det(int(rng.integers(0, 5)), round(float(rng.uniform(0.05, 1.0)), 2),
                            cx, cy, w, h))
        ground_truths[key] = gts
        predictions[key] = [dets[i] for i in rng.permutation(len(dets))]
    if sum(len(v) for v in ground_truths.values()) == 0:
        ground_truths["img0"] = [gt(0, 0.5, 0.5, 0.3, 0.3)]
    return predictions, ground_truths


def test_evaluate_matches_naive_reference():
    cfg = EvalConfig(class_names=NAMES)
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        predictions, ground_truths = random_scene(rng)
        report = evaluation_service.evaluate(predictions, ground_truths, cfg)
        maps, counts = naive_evaluate(
            predictions, ground_truths, cfg.iou_thresholds, 5, cfg.reference_confidence)

        assert (report.tp, report.fp, report.fn) == counts, seed
        assert report.tp + report.fn == report.num_ground_truths
        for got, want in zip(report.map_per_threshold, maps):
            assert abs(got - want) <= 1e-9, seed
        assert abs(report.map50_95 - sum(maps) / len(maps)) <= 1e-9, seed
        # stricter IoU thresholds never raise the mean
        assert report.map50_95 <= report.map50 + 1e-12, seed


def test_match_counts_are_consistent():
    rng = np.random.default_rng(11)
    for _ in range(200):
        predictions, ground_truths = random_scene(rng)
        for k, gts in ground_truths.items():
            outcome = evaluation_service.match_detections(predictions[k], gts, 0.5)
            assert outcome.tp + outcome.fp == len(predictions[k])
            assert outcome.tp + outcome.fn == len(gts)
            assert outcome.tp == sum(outcome.gt_matched)


@pytest.mark.parametrize("mode", list(Interpolation))
def test_extra_top_ranked_hit_never_lowers_ap(mode):
    for seed in range(200):
        predictions, ground_truths = random_scene(np.random.default_rng(seed))
        outcomes = [
            evaluation_service.match_detections(predictions[k], ground_truths[k], 0.5)
            for k in sorted(ground_truths)
        ]
        for c in range(len(NAMES)):
            hit = evaluation_service.match_detections(
                [det(c, 1.0, 0.5, 0.5, 0.2, 0.2)], [gt(c, 0.5, 0.5, 0.2, 0.2)], 0.5)
            before = evaluation_service.precision_recall_curve(outcomes, c)
            # the extra image goes first so the hit outranks confidence ties
            after = evaluation_service.precision_recall_curve([hit] + outcomes, c)
            assert (evaluation_service.average_precision(after, mode)
                    >= evaluation_service.average_precision(before, mode) - 1e-12), (seed, c)


# Report comparison

def report_with(value: float, names=NAMES) -> EvalReport:
    thresholds = default_iou_thresholds()
    per_class = [
        ClassMetrics(class_id=i, name=n, support=1, ap=[value] * len(thresholds))
        for i, n in enumerate(names)
    ]
    return EvalReport(
        class_names=list(names),
        iou_thresholds=thresholds,
        per_class=per_class,
        map_per_threshold=[value] * len(thresholds),
        map50=value,
        map50_95=math.fsum([value] * len(thresholds)) / len(thresholds),
    )


@pytest.mark.parametrize("clean,noisy,dropped", [
    (0.753, 0.745, 0.008),
    (0.735, 0.726, 0.009),
    (0.701, 0.694, 0.007),
    (0.755, 0.747, 0.008),
    (0.757, 0.745, 0.012),
    (0.703, 0.701, 0.002),
    (0.776, 0.769, 0.007),
    (0.782, 0.771, 0.011),
])
def test_noisy_data_drops(clean, noisy, dropped):
    comparison = evaluation_service.compare_reports(report_with(clean), report_with(noisy))
    row = comparison.row("mAP@0.5:0.95")
    assert row.dropped == dropped
    assert (row.baseline, row.other) == (clean, noisy)


def test_identical_reports_have_zero_deltas(scene):
    predictions, ground_truths = scene
    report = evaluation_service.evaluate(predictions, ground_truths, EvalConfig(class_names=NAMES))
    comparison = evaluation_service.compare_reports(report, report)
    assert comparison.rows
    assert all(r.dropped == 0 for r in comparison.rows)
    # zero-support classes have no AP row
    metrics = [r.metric for r in comparison.rows]
    assert "AP@0.5:0.95 open" in metrics
    assert "AP@0.5:0.95 flip" not in metrics


def test_incomparable_reports():
    with pytest.raises(IncomparableReportsException):
        evaluation_service.compare_reports(report_with(0.7), report_with(0.7, ["a", "b"]))


def test_class_gap():
    report = report_with(0.5)
    report.per_class[2].ap = [0.75] * 10
    assert evaluation_service.class_gap(report, 2, 3) == pytest.approx(0.25)


# Parsing

def test_parse_ground_truth_and_predictions():
    boxes = evaluation_service.parse_ground_truth("0 0.5 0.5 0.2 0.2\n\n3 0.1 0.2 0.1 0.1\n", 5)
    assert [b.class_id for b in boxes] == [0, 3]
    dets = evaluation_service.parse_predictions("4 0.87 0.5 0.5 0.2 0.2\n", 5)
    assert dets[0].confidence == 0.87


@pytest.mark.parametrize("text,line", [
    ("0 0.5 0.5 0.2\n", 1),
    ("0 0.5 0.5 0.2 0.2\n7 0.5 0.5 0.2 0.2\n", 2),
    ("0 1.5 0.5 0.2 0.2\n", 1),
    ("0.5 0.5 0.5 0.2 0.2\n", 1),
    ("0 0.5 0.5 0.0 0.2\n", 1),
    ("x 0.5 0.5 0.2 0.2\n", 1),
])
def test_parse_ground_truth_errors(text, line):
    with pytest.raises(AnnotationParseException) as exc:
        evaluation_service.parse_ground_truth(text, 5)
    assert exc.value.line_number == line


def test_parse_prediction_confidence_range():
    with pytest.raises(AnnotationParseException):
        evaluation_service.parse_predictions("0 1.2 0.5 0.5 0.2 0.2\n", 5)
