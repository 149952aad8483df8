# app/schemas/evaluation.py
import math
from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator


def default_iou_thresholds() -> List[float]:
    return [round(0.5 + 0.05 * i, 2) for i in range(10)]


class BBox(BaseModel):
    """Normalized center-format box."""

    model_config = {"frozen": True}

    cx: float = Field(ge=0.0, le=1.0)
    cy: float = Field(ge=0.0, le=1.0)
    w: float = Field(gt=0.0, le=1.0)
    h: float = Field(gt=0.0, le=1.0)

    @classmethod
    def from_corners(
        cls, x1: float, y1: float, x2: float, y2: float, width: float, height: float
    ) -> "BBox":
        """Build from pixel corners on a width x height canvas."""
        return cls(
            cx=(x1 + x2) / 2 / width,
            cy=(y1 + y2) / 2 / height,
            w=(x2 - x1) / width,
            h=(y2 - y1) / height,
        )

    def corners(self) -> Tuple[float, float, float, float]:
        """(x1, y1, x2, y2) clamped to the unit square."""
        return (
            min(max(self.cx - self.w / 2, 0.0), 1.0),
            min(max(self.cy - self.h / 2, 0.0), 1.0),
            min(max(self.cx + self.w / 2, 0.0), 1.0),
            min(max(self.cy + self.h / 2, 0.0), 1.0),
        )

    @property
    def area(self) -> float:
        x1, y1, x2, y2 = self.corners()
        return max(x2 - x1, 0.0) * max(y2 - y1, 0.0)


class GroundTruthBox(BaseModel):
    model_config = {"frozen": True}

    class_id: int = Field(ge=0)
    box: BBox


class Detection(BaseModel):
    model_config = {"frozen": True}

    class_id: int = Field(ge=0)
    confidence: float = Field(ge=0.0, le=1.0)
    box: BBox


class MatchOutcome(BaseModel):
    """TP/FP flags per detection and matched/FN flags per ground truth, in input order."""

    detections: List[Detection]
    ground_truths: List[GroundTruthBox]
    true_positive: List[bool]
    gt_matched: List[bool]
    iou_threshold: float

    @property
    def tp(self) -> int:
        return sum(self.true_positive)

    @property
    def fp(self) -> int:
        return len(self.true_positive) - self.tp

    @property
    def fn(self) -> int:
        return len(self.gt_matched) - sum(self.gt_matched)

    @property
    def tn(self) -> int:
        # no negatives to count in detection
        return 0


class PRPoint(BaseModel):
    recall: float = Field(ge=0.0, le=1.0)
    precision: float = Field(ge=0.0, le=1.0)
    confidence: float


class PRCurve(BaseModel):
    class_id: int
    support: int = Field(ge=0)
    points: List[PRPoint] = Field(default_factory=list)

    @property
    def zero_support(self) -> bool:
        return self.support == 0


class Interpolation(str, Enum):
    ELEVEN_POINT = "11point"
    ALL_POINT = "all_point"


class EvalConfig(BaseModel):
    iou_thresholds: List[float] = Field(default_factory=default_iou_thresholds)
    num_classes: int = Field(default=5, ge=1)
    class_names: Optional[List[str]] = None
    reference_confidence: float = Field(default=0.25, ge=0.0, le=1.0)
    interpolation: Interpolation = Interpolation.ELEVEN_POINT

    @field_validator("iou_thresholds")
    @classmethod
    def _thresholds(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("at least one IoU threshold is required")
        for t in v:
            if not 0.0 < t < 1.0:
                raise ValueError(f"IoU threshold {t} outside (0, 1)")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("IoU thresholds must be strictly increasing")
        return v

    @model_validator(mode="after")
    def _names(self) -> "EvalConfig":
        if self.class_names is not None and len(self.class_names) != self.num_classes:
            raise ValueError(
                f"{len(self.class_names)} class names for {self.num_classes} classes")
        return self

    def names(self) -> List[str]:
        if self.class_names is not None:
            return list(self.class_names)
        return [str(i) for i in range(self.num_classes)]


class ClassMetrics(BaseModel):
    class_id: int
    name: str
    support: int
    # aligned with EvalReport.iou_thresholds; None when the class has no ground truth
    ap: Optional[List[float]] = None

    @property
    def zero_support(self) -> bool:
        return self.support == 0

    @property
    def ap50_95(self) -> Optional[float]:
        if self.ap is None:
            return None
        return math.fsum(self.ap) / len(self.ap)


class EvalReport(BaseModel):
    class_names: List[str]
    iou_thresholds: List[float]
    interpolation: Interpolation = Interpolation.ELEVEN_POINT
    reference_confidence: float = 0.25
    num_images: int = 0
    num_ground_truths: int = 0
    num_detections: int = 0
    per_class: List[ClassMetrics]
    map_per_threshold: List[float]
    map50: Optional[float] = None
    map50_95: float = Field(ge=0.0, le=1.0)
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @model_validator(mode="after")
    def _consistent(self) -> "EvalReport":
        if len(self.map_per_threshold) != len(self.iou_thresholds):
            raise ValueError("one mAP per IoU threshold is required")
        if any(not 0.0 <= m <= 1.0 for m in self.map_per_threshold):
            raise ValueError("mAP values must lie in [0, 1]")
        mean = math.fsum(self.map_per_threshold) / len(self.map_per_threshold)
        if not math.isclose(mean, self.map50_95, abs_tol=1e-12):
            raise ValueError("map50_95 must equal the mean of the per-threshold mAPs")
        return self


class DeltaRow(BaseModel):
    metric: str
    baseline: float
    other: float
    dropped: float


class ReportComparison(BaseModel):
    rows: List[DeltaRow]
    decimals: int = 3

    def row(self, metric: str) -> DeltaRow:
        for r in self.rows:
            if r.metric == metric:
                return r
        raise KeyError(metric)
