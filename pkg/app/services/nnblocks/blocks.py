# app/services/nnblocks/blocks.py
from typing import Dict, Optional, Protocol, Tuple

import numpy as np

from app.services.nnblocks import functional as F

Grads = Dict[str, np.ndarray]


class Block(Protocol):
    """Anything the gradient harness can drive.

    `parameters()` must return the live arrays: the harness perturbs them in place.
    `backward` uses state cached by the most recent `forward`.
    """

    def parameters(self) -> Dict[str, np.ndarray]: ...

    def forward(self, x: np.ndarray) -> np.ndarray: ...

    def backward(self, dy: np.ndarray) -> Tuple[np.ndarray, Grads]: ...


class LinearBlock:
    def __init__(self, w: np.ndarray, b: np.ndarray):
        self.w = F.as_tensor(w, "W")
        self.b = F.as_tensor(b, "b")
        self._x: Optional[np.ndarray] = None

    def parameters(self) -> Dict[str, np.ndarray]:
        return {"w": self.w, "b": self.b}

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        return F.linear(x, self.w, self.b)

    def backward(self, dy: np.ndarray) -> Tuple[np.ndarray, Grads]:
        dx, dw, db = F.linear_backward(dy, self._x, self.w)
        return dx, {"w": dw, "b": db}


class SoftmaxBlock:
    def __init__(self):
        self._y: Optional[np.ndarray] = None

    def parameters(self) -> Dict[str, np.ndarray]:
        return {}

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._y = F.softmax(x)
        return self._y

    def backward(self, dy: np.ndarray) -> Tuple[np.ndarray, Grads]:
        return F.softmax_backward(dy, self._y), {}


class LayerNormBlock:
    def __init__(self, gain: np.ndarray, bias: np.ndarray, eps: float = 1e-5):
        self.gain = F.as_tensor(gain, "gain")
        self.bias = F.as_tensor(bias, "bias")
        self.eps = eps
        self._cache = None

    def parameters(self) -> Dict[str, np.ndarray]:
        return {"gain": self.gain, "bias": self.bias}

    def forward(self, x: np.ndarray) -> np.ndarray:
        y, self._cache = F.layer_norm(x, self.gain, self.bias, self.eps)
        return y

    def backward(self, dy: np.ndarray) -> Tuple[np.ndarray, Grads]:
        dx, dgain, dbias = F.layer_norm_backward(dy, self._cache, self.gain)
        return dx, {"gain": dgain, "bias": dbias}


class GELUBlock:
    def __init__(self):
        self._x: Optional[np.ndarray] = None

    def parameters(self) -> Dict[str, np.ndarray]:
        return {}

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        return F.gelu(x)

    def backward(self, dy: np.ndarray) -> Tuple[np.ndarray, Grads]:
        return F.gelu_backward(dy, self._x), {}
