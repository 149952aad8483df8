from app.services.nnblocks.blocks import (
    Block,
    GELUBlock,
    LayerNormBlock,
    LinearBlock,
    SoftmaxBlock,
)
from app.services.nnblocks.gradcheck import CheckRow, grad_check, run_block_checks
from app.services.nnblocks.heads import HeadConfig, HeadShape, HeadVariant, head_shapes
from app.services.nnblocks.se import SEBlock, SEParams, se_forward
from app.services.nnblocks.transformer import (
    MultiHeadAttention,
    TransformerEncoder,
    TransformerParams,
    mha_forward,
    transformer_encoder_forward,
)

__all__ = [
    "Block",
    "CheckRow",
    "GELUBlock",
    "HeadConfig",
    "HeadShape",
    "HeadVariant",
    "LayerNormBlock",
    "LinearBlock",
    "MultiHeadAttention",
    "SEBlock",
    "SEParams",
    "SoftmaxBlock",
    "TransformerEncoder",
    "TransformerParams",
    "grad_check",
    "head_shapes",
    "mha_forward",
    "run_block_checks",
    "se_forward",
    "transformer_encoder_forward",
]
