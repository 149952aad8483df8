# app/services/nnblocks/transformer.py
from dataclasses import dataclass, fields
from typing import Dict, Optional, Tuple

import numpy as np

from app.services.nnblocks import functional as F
from app.services.nnblocks.blocks import Grads
from app.utils.exceptions import ConfigException, DimensionException

MLP_RATIO = 4

ATTENTION_KEYS = ("wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo")


@dataclass
class TransformerParams:
    """Pre-norm encoder parameters; attention projections are d x d, MLP is d -> 4d -> d."""

    width: int
    heads: int
    wq: np.ndarray
    bq: np.ndarray
    wk: np.ndarray
    bk: np.ndarray
    wv: np.ndarray
    bv: np.ndarray
    wo: np.ndarray
    bo: np.ndarray
    ln1_gain: np.ndarray
    ln1_bias: np.ndarray
    ln2_gain: np.ndarray
    ln2_bias: np.ndarray
    w_fc1: np.ndarray
    b_fc1: np.ndarray
    w_fc2: np.ndarray
    b_fc2: np.ndarray
    eps: float = 1e-5

    def __post_init__(self):
        if self.width < 1 or self.heads < 1 or self.width % self.heads:
            raise ConfigException(
                f"model width {self.width} is not divisible by {self.heads} heads")
        for name, shape in self.shapes().items():
            arr = F.as_tensor(getattr(self, name), name)
            if arr.shape != shape:
                raise DimensionException(f"transformer {name}", arr.shape, shape)
            setattr(self, name, arr)

    @property
    def head_dim(self) -> int:
        return self.width // self.heads

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        return _shapes(self.width)

    def arrays(self) -> Dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)
                if f.name not in ("width", "heads", "eps")}

    @classmethod
    def zeros(cls, width: int, heads: int = 4) -> "TransformerParams":
        """Zero projections and MLP, unit LayerNorm gains: the encoder is the identity."""
        _check_heads(width, heads)
        arrays = {name: np.zeros(shape) for name, shape in _shapes(width).items()}
        arrays["ln1_gain"] = np.ones(width)
        arrays["ln2_gain"] = np.ones(width)
        return cls(width=width, heads=heads, **arrays)

    @classmethod
    def random(cls, width: int, heads: int = 4, seed: int = 0) -> "TransformerParams":
        _check_heads(width, heads)
        rng = np.random.default_rng(seed)
        arrays = {}
        for name, shape in _shapes(width).items():
            if name.endswith("gain"):
                arrays[name] = 1.0 + rng.normal(0.0, 0.1, shape)
            elif name.startswith("w"):
                arrays[name] = rng.normal(0.0, 1.0 / np.sqrt(shape[1]), shape)
            else:
                arrays[name] = rng.normal(0.0, 0.1, shape)
        return cls(width=width, heads=heads, **arrays)


def _check_heads(width: int, heads: int) -> None:
    if width < 1 or heads < 1 or width % heads:
        raise ConfigException(f"model width {width} is not divisible by {heads} heads")


def _shapes(d: int) -> Dict[str, Tuple[int, ...]]:
    hidden = MLP_RATIO * d
    shapes: Dict[str, Tuple[int, ...]] = {}
    for p in "qkvo":
        shapes[f"w{p}"] = (d, d)
        shapes[f"b{p}"] = (d,)
    shapes.update({
        "ln1_gain": (d,), "ln1_bias": (d,),
        "ln2_gain": (d,), "ln2_bias": (d,),
        "w_fc1": (hidden, d), "b_fc1": (hidden,),
        "w_fc2": (d, hidden), "b_fc2": (d,),
    })
    return shapes


class MultiHeadAttention:
    """Self-attention over the rows of x [n x d]."""

    def __init__(self, params: TransformerParams):
        self.p = params
        self._cache: Optional[tuple] = None

    def parameters(self) -> Dict[str, np.ndarray]:
        return {k: getattr(self.p, k) for k in ATTENTION_KEYS}

    def _split(self, t: np.ndarray) -> np.ndarray:
        n = t.shape[0]
        return t.reshape(n, self.p.heads, self.p.head_dim).transpose(1, 0, 2)

    def _merge(self, t: np.ndarray) -> np.ndarray:
        return t.transpose(1, 0, 2).reshape(t.shape[1], self.p.width)

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] != self.p.width:
            raise DimensionException("attention input", x.shape, (x.shape[0], self.p.width))
        p = self.p
        scale = 1.0 / np.sqrt(p.head_dim)
        q = self._split(F.linear(x, p.wq, p.bq))
        # the key bias adds a per-query constant to every score and cancels in the softmax
        k = self._split(x @ p.wk.T)
        v = self._split(F.linear(x, p.wv, p.bv))
        attn = F.softmax(q @ k.transpose(0, 2, 1) * scale)
        heads = self._merge(attn @ v)
        self._cache = (x, q, k, v, attn, heads, scale)
        return F.linear(heads, p.wo, p.bo)

    def backward(self, dy: np.ndarray) -> Tuple[np.ndarray, Grads]:
        x, q, k, v, attn, heads, scale = self._cache
        p = self.p
        dheads, dwo, dbo = F.linear_backward(dy, heads, p.wo)
        dctx = self._split(dheads)
        dattn = dctx @ v.transpose(0, 2, 1)
        dv = attn.transpose(0, 2, 1) @ dctx
        dscores = F.softmax_backward(dattn, attn) * scale
        dq = dscores @ k
        dk = dscores.transpose(0, 2, 1) @ q

        dxq, dwq, dbq = F.linear_backward(self._merge(dq), x, p.wq)
        dxk, dwk, _ = F.linear_backward(self._merge(dk), x, p.wk)
        dxv, dwv, dbv = F.linear_backward(self._merge(dv), x, p.wv)
        grads = {
            "wq": dwq, "bq": dbq,
            "wk": dwk, "bk": np.zeros_like(p.bk),
            "wv": dwv, "bv": dbv,
            "wo": dwo, "bo": dbo,
        }
        return dxq + dxk + dxv, grads


class TransformerEncoder:
    """x1 = x + MHA(LN1(x)); y = x1 + MLP(LN2(x1)), MLP = fc1 -> GELU -> fc2."""

    def __init__(self, params: TransformerParams):
        self.p = params
        self.attention = MultiHeadAttention(params)
        self._cache: Optional[tuple] = None

    def parameters(self) -> Dict[str, np.ndarray]:
        return self.p.arrays()

    def forward(self, x: np.ndarray) -> np.ndarray:
        p = self.p
        h1, ln1 = F.layer_norm(x, p.ln1_gain, p.ln1_bias, p.eps)
        x1 = x + self.attention.forward(h1)
        h2, ln2 = F.layer_norm(x1, p.ln2_gain, p.ln2_bias, p.eps)
        z = F.linear(h2, p.w_fc1, p.b_fc1)
        a = F.gelu(z)
        self._cache = (ln1, ln2, h2, z, a)
        return x1 + F.linear(a, p.w_fc2, p.b_fc2)

    def backward(self, dy: np.ndarray) -> Tuple[np.ndarray, Grads]:
        ln1, ln2, h2, z, a = self._cache
        p = self.p
        da, dw_fc2, db_fc2 = F.linear_backward(dy, a, p.w_fc2)
        dz = F.gelu_backward(da, z)
        dh2, dw_fc1, db_fc1 = F.linear_backward(dz, h2, p.w_fc1)
        dx1_ln, dln2_gain, dln2_bias = F.layer_norm_backward(dh2, ln2, p.ln2_gain)
        dx1 = dy + dx1_ln

        dh1, grads = self.attention.backward(dx1)
        dx_ln, dln1_gain, dln1_bias = F.layer_norm_backward(dh1, ln1, p.ln1_gain)
        grads.update({
            "ln1_gain": dln1_gain, "ln1_bias": dln1_bias,
            "ln2_gain": dln2_gain, "ln2_bias": dln2_bias,
            "w_fc1": dw_fc1, "b_fc1": db_fc1,
            "w_fc2": dw_fc2, "b_fc2": db_fc2,
        })
        return dx1 + dx_ln, grads


def mha_forward(x: np.ndarray, params: TransformerParams) -> np.ndarray:
    return MultiHeadAttention(params).forward(F.as_tensor(x, "x"))


def transformer_encoder_forward(x: np.ndarray, params: TransformerParams) -> np.ndarray:
    return TransformerEncoder(params).forward(F.as_tensor(x, "x"))
