"""Minimal dense tensor algebra with reverse-mode differentiation."""

from .check import grad_check
from .core import (
    Graph,
    NonScalarRoot,
    ShapeError,
    Tensor,
    as_tensor,
    backward,
    build_graph,
    grad_enabled,
    leaves_of,
    no_grad,
)
from .ops import (
    add,
    concat,
    div,
    gelu,
    layer_norm,
    linear,
    matmul,
    mean,
    mse,
    mul,
    narrow,
    neg,
    reshape,
    rms_norm,
    sigmoid,
    silu,
    softmax,
    split,
    sqrt,
    square,
    sub,
    sum_,
    transpose,
)
from .rope import rope_3d

__all__ = [
    "Graph",
    "NonScalarRoot",
    "ShapeError",
    "Tensor",
    "as_tensor",
    "backward",
    "build_graph",
    "grad_check",
    "grad_enabled",
    "leaves_of",
    "no_grad",
    "add",
    "concat",
    "div",
    "gelu",
    "layer_norm",
    "linear",
    "matmul",
    "mean",
    "mse",
    "mul",
    "narrow",
    "neg",
    "reshape",
    "rms_norm",
    "rope_3d",
    "sigmoid",
    "silu",
    "softmax",
    "split",
    "sqrt",
    "square",
    "sub",
    "sum_",
    "transpose",
]
