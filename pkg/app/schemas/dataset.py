# app/schemas/dataset.py
from collections import Counter
from enum import IntEnum
from typing import Dict, List, Optional, Union

from pydantic import BaseModel, Field, model_validator

from app.schemas.evaluation import BBox, GroundTruthBox
from app.schemas.imaging import BlurCategory, BlurRecord


class GestureClass(IntEnum):
    OPEN = 0
    CLOSE = 1
    PINCH_OPEN = 2
    PINCH_CLOSE = 3
    FLIP = 4

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def names(cls) -> List[str]:
        return [g.label for g in cls]

    @classmethod
    def parse(cls, token: Union[str, int]) -> "GestureClass":
        """Accept an integer id, a digit string or a name like 'pinch_open' / 'Pinch Open'."""
        if isinstance(token, int):
            return cls(token)
        text = token.strip()
        if text.isdigit():
            return cls(int(text))
        key = text.lower().replace(" ", "_").replace("-", "_")
        for g in cls:
            if g.label == key:
                return g
        raise ValueError(f"unknown gesture '{token}'")


class LabeledBox(BaseModel):
    model_config = {"frozen": True}

    gesture: GestureClass
    box: BBox

    def to_ground_truth(self) -> GroundTruthBox:
        return GroundTruthBox(class_id=int(self.gesture), box=self.box)


class AnnotatedImage(BaseModel):
    path: str
    width: int = Field(ge=1)
    height: int = Field(ge=1)
    blur_score: float = Field(ge=0)
    blur_category: BlurCategory
    boxes: List[LabeledBox] = Field(default_factory=list)
    participant: Optional[str] = None
    fps: Optional[float] = Field(default=None, gt=0)

    @property
    def blur(self) -> BlurRecord:
        return BlurRecord(score=self.blur_score, category=self.blur_category)


class DatasetManifest(BaseModel):
    name: str
    entries: List[AnnotatedImage] = Field(default_factory=list)
    counts: Dict[BlurCategory, int] = Field(default_factory=dict)

    @classmethod
    def from_entries(cls, name: str, entries: List[AnnotatedImage]) -> "DatasetManifest":
        return cls(name=name, entries=entries, counts=tally(entries))

    @model_validator(mode="after")
    def _consistent(self) -> "DatasetManifest":
        paths = [e.path for e in self.entries]
        if len(set(paths)) != len(paths):
            raise ValueError("manifest paths must be unique")
        if self.counts != tally(self.entries):
            raise ValueError("manifest counts do not match its entries")
        return self

    def __len__(self) -> int:
        return len(self.entries)


def tally(entries: List[AnnotatedImage]) -> Dict[BlurCategory, int]:
    found = Counter(e.blur_category for e in entries)
    return {c: found.get(c, 0) for c in BlurCategory}


class SplitResult(BaseModel):
    dataset1: DatasetManifest
    dataset2: DatasetManifest
    requested_mix: Optional[float] = None
    achieved_mix: float
    shortfall: int = 0


class PartitionResult(BaseModel):
    train: DatasetManifest
    val: DatasetManifest
    test: DatasetManifest


class TrainConfig(BaseModel):
    """Training hyper-parameters for a detector run."""

    model_config = {"extra": "forbid"}

    epochs: int = Field(default=50, gt=0)
    batch: int = Field(default=32, gt=0)
    imgsz: int = Field(default=640, gt=0)
    lr0: float = Field(default=0.01, gt=0)
    optimizer: str = Field(default="SGD")
    warmup: bool = True
    translate: bool = True
    scale: bool = True
    fliplr: bool = True
    mosaic: bool = True
