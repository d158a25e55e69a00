"""Minimal reverse-mode automatic differentiation over numpy arrays."""

from .conv import conv, conv_transpose, upsample_nearest
from .gradcheck import grad_check, numeric_gradient
from .ops import (
    abs, add, clip, concat, div, exp, gather, getitem, leaky_relu, log, matmul, maximum,
    mean, mul, neg, power, relu, reshape, scatter_add, sigmoid, softplus, sqrt, stack, sub,
    sum, tanh, transpose, where,
)
from .tensor import Tensor, as_tensor, backward, get_default_dtype, precision, set_default_dtype

__all__ = [
    "Tensor", "as_tensor", "backward", "get_default_dtype", "precision", "set_default_dtype",
    "grad_check", "numeric_gradient", "conv", "conv_transpose", "upsample_nearest",
    "abs", "add", "clip", "concat", "div", "exp", "gather", "getitem", "leaky_relu", "log",
    "matmul", "maximum", "mean", "mul", "neg", "power", "relu", "reshape", "scatter_add",
    "sigmoid", "softplus", "sqrt", "stack", "sub", "sum", "tanh", "transpose", "where",
]
