# app/services/nnblocks/heads.py
from enum import Enum
from typing import List, NamedTuple, Tuple

from pydantic import BaseModel, Field

from app.utils.exceptions import ConfigException


class HeadVariant(str, Enum):
    P5 = "P5"
    P6 = "P6"


STRIDES = {
    HeadVariant.P5: (8, 16, 32),
    HeadVariant.P6: (8, 16, 32, 64),
}


class HeadConfig(BaseModel):
    variant: HeadVariant = HeadVariant.P5
    anchors: int = Field(default=3, ge=1)
    num_classes: int = Field(default=5, ge=1)

    @property
    def strides(self) -> Tuple[int, ...]:
        return STRIDES[self.variant]


class HeadShape(NamedTuple):
    grid_h: int
    grid_w: int
    channels: int


def head_shapes(cfg: HeadConfig, input_size: int) -> List[HeadShape]:
    """Output grid and channel count of every detection scale for a square input."""
    bad = [s for s in cfg.strides if input_size <= 0 or input_size % s]
    if bad:
        raise ConfigException(
            f"input size {input_size} is not divisible by strides {bad}", key="imgsz")
    channels = cfg.anchors * (5 + cfg.num_classes)
    return [HeadShape(input_size // s, input_size // s, channels) for s in cfg.strides]
