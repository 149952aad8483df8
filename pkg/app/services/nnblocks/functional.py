# app/services/nnblocks/functional.py
"""Forward/backward pairs for the primitives shared by the attention blocks.

Every backward takes the upstream gradient plus whatever the forward returned
or consumed, and returns gradients in the argument order of the forward.
"""
from typing import Tuple

import numpy as np
from scipy.special import ndtr

from app.utils.exceptions import DimensionException, NumericFailureException

MAX_RANK = 4


def as_tensor(x, name: str = "tensor") -> np.ndarray:
    """Validate and return a float64 array of rank <= 4 with finite entries."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim > MAX_RANK:
        raise DimensionException(f"{name} rank", arr.shape, (MAX_RANK,))
    if not np.all(np.isfinite(arr)):
        raise NumericFailureException(f"{name} has non-finite entries")
    return arr


def linear(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """y = x W^T + b for x [n x in], W [out x in], b [out]."""
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[1]:
        raise DimensionException("linear input/weight", x.shape, w.shape)
    if b.shape != (w.shape[0],):
        raise DimensionException("linear weight/bias", w.shape, b.shape)
    return x @ w.T + b


def linear_backward(
    dy: np.ndarray, x: np.ndarray, w: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    return dy @ w, dy.T @ x, dy.sum(axis=0)


def softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(dy: np.ndarray, y: np.ndarray) -> np.ndarray:
    return y * (dy - (dy * y).sum(axis=-1, keepdims=True))


def layer_norm(
    x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float = 1e-5
) -> Tuple[np.ndarray, Tuple[np.ndarray, np.ndarray]]:
    """Normalize over the last axis; returns (y, cache) with cache = (x_hat, 1/std)."""
    if gain.shape != x.shape[-1:] or bias.shape != x.shape[-1:]:
        raise DimensionException("layer_norm gain/bias", gain.shape, x.shape[-1:])
    mean = x.mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(x.var(axis=-1, keepdims=True) + eps)
    x_hat = (x - mean) * inv_std
    return x_hat * gain + bias, (x_hat, inv_std)


def layer_norm_backward(
    dy: np.ndarray, cache: Tuple[np.ndarray, np.ndarray], gain: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    x_hat, inv_std = cache
    lead = tuple(range(dy.ndim - 1))
    dgain = (dy * x_hat).sum(axis=lead)
    dbias = dy.sum(axis=lead)
    dx_hat = dy * gain
    dx = inv_std * (
        dx_hat
        - dx_hat.mean(axis=-1, keepdims=True)
        - x_hat * (dx_hat * x_hat).mean(axis=-1, keepdims=True)
    )
    return dx, dgain, dbias


def gelu(x: np.ndarray) -> np.ndarray:
    """Exact GELU, x * Phi(x)."""
    return x * ndtr(x)


def gelu_backward(dy: np.ndarray, x: np.ndarray) -> np.ndarray:
    pdf = np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
    return dy * (ndtr(x) + x * pdf)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(dy: np.ndarray, x: np.ndarray) -> np.ndarray:
    return dy * (x > 0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def sigmoid_backward(dy: np.ndarray, y: np.ndarray) -> np.ndarray:
    return dy * y * (1.0 - y)
