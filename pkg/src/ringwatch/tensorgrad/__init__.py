"""Minimal float64 reverse-mode autodiff with the layers the hand model needs."""

from . import functional, nn
from .functional import conv1d, layer_norm, log_softmax, mse, softmax
from .gradcheck import grad_check, grad_check_params
from .nn import ConfigError, lstm_forward, multi_head_attention, positional_encoding
from .tensor import (
    ShapeError,
    Tensor,
    atan2,
    concat,
    matmul,
    no_grad,
    stack,
    topological_order,
)

__all__ = [
    "ConfigError",
    "ShapeError",
    "Tensor",
    "atan2",
    "concat",
    "conv1d",
    "functional",
    "grad_check",
    "grad_check_params",
    "layer_norm",
    "log_softmax",
    "lstm_forward",
    "matmul",
    "mse",
    "multi_head_attention",
    "nn",
    "no_grad",
    "positional_encoding",
    "softmax",
    "stack",
    "topological_order",
]
