# app/schemas/imaging.py
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from app.utils.exceptions import InvalidInputException


class BlurCategory(str, Enum):
    CLEAR = "clear"
    BLURRED = "blurred"
    TOTALLY_BLURRED = "totally_blurred"


class BlurThresholds(BaseModel):
    low: float = Field(default=10.0, gt=0)
    high: float = Field(default=50.0, gt=0)

    @model_validator(mode="after")
    def _ordered(self) -> "BlurThresholds":
        if not self.low < self.high:
            raise ValueError(
                f"low threshold {self.low} must be below high {self.high}")
        return self


class BlurRecord(BaseModel):
    score: float = Field(ge=0)
    category: BlurCategory
    # raster size, set when the record comes from a decoded file
    width: Optional[int] = Field(default=None, ge=1)
    height: Optional[int] = Field(default=None, ge=1)

    @property
    def std(self) -> float:
        return math.sqrt(self.score)


@dataclass(frozen=True)
class GrayImage:
    """Row-major grayscale raster, float64 values in [0, 255]."""

    data: np.ndarray

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.size == 0:
            raise InvalidInputException(
                f"gray image needs a non-empty 2-D array, got shape {self.data.shape}")
        if self.data.min() < 0 or self.data.max() > 255:
            raise InvalidInputException("gray values must lie in [0, 255]")

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def height(self) -> int:
        return int(self.data.shape[0])
