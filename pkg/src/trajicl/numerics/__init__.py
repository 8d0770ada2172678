"""Minimal dense-tensor autodiff plus the neural blocks the policy needs."""

from .nn import (
    AttentionWeights,
    ConfigurationError,
    EmptyLossError,
    causal_attention_mask,
    causal_self_attention,
    cross_entropy_masked,
    dropout,
    gelu,
    layer_norm,
    linear,
    softmax,
    trunc_normal,
)
from .optim import NonFiniteGradientError, OptimizerState, adamw_step, clip_grad_norm, cosine_lr
from .tensor import (
    DoubleBackwardError,
    ShapeError,
    Tensor,
    as_tensor,
    embedding,
    matmul,
    no_grad,
    scatter_rows,
    take_rows,
)

__all__ = [
    "AttentionWeights",
    "ConfigurationError",
    "DoubleBackwardError",
    "EmptyLossError",
    "NonFiniteGradientError",
    "OptimizerState",
    "ShapeError",
    "Tensor",
    "adamw_step",
    "as_tensor",
    "causal_attention_mask",
    "causal_self_attention",
    "clip_grad_norm",
    "cosine_lr",
    "cross_entropy_masked",
    "dropout",
    "embedding",
    "gelu",
    "layer_norm",
    "linear",
    "matmul",
    "no_grad",
    "scatter_rows",
    "softmax",
    "take_rows",
    "trunc_normal",
]
