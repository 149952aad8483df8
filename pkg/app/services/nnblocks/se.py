# app/services/nnblocks/se.py
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from app.services.nnblocks import functional as F
from app.services.nnblocks.blocks import Grads
from app.utils.exceptions import ConfigException, DimensionException


def bottleneck(channels: int, reduction: int) -> int:
    return max(1, channels // reduction)


@dataclass
class SEParams:
    channels: int
    reduction: int
    w1: np.ndarray  # (C/r) x C
    b1: np.ndarray
    w2: np.ndarray  # C x (C/r)
    b2: np.ndarray

    def __post_init__(self):
        if self.channels < 1 or self.reduction < 1:
            raise ConfigException("channels and reduction must be positive")
        hidden = bottleneck(self.channels, self.reduction)
        expected = {
            "w1": (hidden, self.channels),
            "b1": (hidden,),
            "w2": (self.channels, hidden),
            "b2": (self.channels,),
        }
        for name, shape in expected.items():
            arr = F.as_tensor(getattr(self, name), name)
            if arr.shape != shape:
                raise DimensionException(f"SE {name}", arr.shape, shape)
            setattr(self, name, arr)

    @classmethod
    def zeros(cls, channels: int, reduction: int = 16) -> "SEParams":
        hidden = bottleneck(channels, reduction)
        return cls(
            channels, reduction,
            np.zeros((hidden, channels)), np.zeros(hidden),
            np.zeros((channels, hidden)), np.zeros(channels),
        )

    @classmethod
    def random(cls, channels: int, reduction: int = 16, seed: int = 0) -> "SEParams":
        rng = np.random.default_rng(seed)
        hidden = bottleneck(channels, reduction)
        return cls(
            channels, reduction,
            rng.normal(0.0, 1.0 / np.sqrt(channels), (hidden, channels)),
            rng.normal(0.0, 0.1, hidden),
            rng.normal(0.0, 1.0 / np.sqrt(hidden), (channels, hidden)),
            rng.normal(0.0, 0.1, channels),
        )


class SEBlock:
    """Squeeze (global average pool), excite (bottleneck MLP + sigmoid), rescale channels."""

    def __init__(self, params: SEParams):
        self.p = params
        self._cache: Optional[tuple] = None

    def parameters(self) -> Dict[str, np.ndarray]:
        return {"w1": self.p.w1, "b1": self.p.b1, "w2": self.p.w2, "b2": self.p.b2}

    def gates(self, x: np.ndarray) -> np.ndarray:
        self.forward(x)
        return self._cache[4]

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 3 or x.shape[0] != self.p.channels:
            raise DimensionException("SE input channels", x.shape, (self.p.channels,))
        s = x.mean(axis=(1, 2))
        z1 = self.p.w1 @ s + self.p.b1
        a1 = F.relu(z1)
        g = F.sigmoid(self.p.w2 @ a1 + self.p.b2)
        self._cache = (x, s, z1, a1, g)
        return g[:, None, None] * x

    def backward(self, dy: np.ndarray) -> Tuple[np.ndarray, Grads]:
        x, s, z1, a1, g = self._cache
        dg = (dy * x).sum(axis=(1, 2))
        dz2 = F.sigmoid_backward(dg, g)
        dw2 = np.outer(dz2, a1)
        dz1 = F.relu_backward(self.p.w2.T @ dz2, z1)
        dw1 = np.outer(dz1, s)
        ds = self.p.w1.T @ dz1
        spatial = x.shape[1] * x.shape[2]
        dx = dy * g[:, None, None] + ds[:, None, None] / spatial
        return dx, {"w1": dw1, "b1": dz1, "w2": dw2, "b2": dz2}


def se_forward(x: np.ndarray, params: SEParams) -> np.ndarray:
    return SEBlock(params).forward(F.as_tensor(x, "x"))
