# app/services/nnblocks/gradcheck.py
from typing import Callable, List, Tuple

import numpy as np
import structlog
from pydantic import BaseModel

from app.services.nnblocks import functional as F
from app.services.nnblocks.blocks import (
    Block,
    GELUBlock,
    LayerNormBlock,
    LinearBlock,
    SoftmaxBlock,
)
from app.services.nnblocks.se import SEBlock, SEParams
from app.services.nnblocks.transformer import (
    MultiHeadAttention,
    TransformerEncoder,
    TransformerParams,
)
from app.utils.exceptions import NumericFailureException

logger = structlog.get_logger()

STEP = 1e-5
DENOMINATOR_FLOOR = 1e-8


def grad_check(block: Block, x: np.ndarray, seed: int = 0, step: float = STEP) -> float:
    """Max relative error between analytic and central-difference gradients.

    The scalar probed is L = sum(R * forward(x)) with R drawn from `seed`; every
    coordinate of x and of every parameter is perturbed in place and restored.
    """
    x = F.as_tensor(x, "x").copy()
    y = block.forward(x)
    if not np.all(np.isfinite(y)):
        raise NumericFailureException("forward output is not finite")
    upstream = np.random.default_rng(seed).normal(size=y.shape)
    dx, grads = block.backward(upstream)

    def loss() -> float:
        out = block.forward(x)
        if not np.all(np.isfinite(out)):
            raise NumericFailureException("forward output is not finite")
        return float(np.sum(upstream * out))

    targets = [("x", x, dx)]
    targets += [(name, arr, grads[name]) for name, arr in block.parameters().items()]

    worst = 0.0
    for name, arr, analytic in targets:
        numeric = np.zeros_like(arr)
        for i in range(arr.size):
            saved = arr.flat[i]
            arr.flat[i] = saved + step
            plus = loss()
            arr.flat[i] = saved - step
            minus = loss()
            arr.flat[i] = saved
            numeric.flat[i] = (plus - minus) / (2 * step)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), DENOMINATOR_FLOOR)
        err = float(np.max(np.abs(analytic - numeric) / denom)) if arr.size else 0.0
        if err > worst:
            worst = err
        logger.debug("grad_checked", target=name, max_rel_error=err)
    return worst


class CheckRow(BaseModel):
    block: str
    config: str
    max_rel_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


Case = Tuple[str, str, float, Callable[[np.random.Generator, int], Tuple[Block, np.ndarray]]]


def _cases(tokens: int, width: int, heads: int, channels: int) -> List[Case]:
    def linear(rng, seed):
        return LinearBlock(rng.normal(size=(4, 4)), rng.normal(size=4)), rng.normal(size=(3, 4))

    def softmax(rng, seed):
        return SoftmaxBlock(), rng.normal(size=(tokens, width))

    def layer_norm(rng, seed):
        block = LayerNormBlock(1.0 + rng.normal(0.0, 0.1, width), rng.normal(0.0, 0.1, width))
        return block, rng.normal(size=(tokens, width))

    def gelu(rng, seed):
        return GELUBlock(), rng.normal(size=(tokens, width))

    def se(rng, seed):
        block = SEBlock(SEParams.random(channels, seed=seed))
        return block, rng.normal(size=(channels, 3, 3))

    def mha(rng, seed):
        block = MultiHeadAttention(TransformerParams.random(width, heads, seed=seed))
        return block, rng.normal(size=(tokens, width))

    def encoder(rng, seed):
        block = TransformerEncoder(TransformerParams.random(width, heads, seed=seed))
        return block, rng.normal(size=(tokens, width))

    seq = f"n={tokens} d={width}"
    return [
        ("linear", "3x4 -> 4", 1e-6, linear),
        ("softmax", seq, 1e-5, softmax),
        ("layer_norm", seq, 1e-5, layer_norm),
        ("gelu", seq, 1e-5, gelu),
        ("se", f"C={channels} r=16 3x3", 1e-4, se),
        ("mha", f"{seq} h={heads}", 1e-4, mha),
        ("encoder", f"{seq} h={heads}", 1e-4, encoder),
    ]


def run_block_checks(
    seed: int = 0,
    trials: int = 1,
    tokens: int = 3,
    width: int = 8,
    heads: int = 2,
    channels: int = 8,
) -> List[CheckRow]:
    """Grad-check every block over `trials` consecutive seeds; one row per block with the worst error."""
    rows = []
    for name, config, tolerance, build in _cases(tokens, width, heads, channels):
        worst = 0.0
        for trial in range(trials):
            trial_seed = seed + trial
            rng = np.random.default_rng(trial_seed)
            block, x = build(rng, trial_seed)
            worst = max(worst, grad_check(block, x, seed=trial_seed))
        rows.append(CheckRow(block=name, config=config, max_rel_error=worst, tolerance=tolerance))
        logger.info("block_checked", block=name, max_rel_error=worst, trials=trials)
    return rows
