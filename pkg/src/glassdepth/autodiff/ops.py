"""Elementwise, reduction, shape and indexing ops."""

import numpy as np

from ..errors import DimensionError
from .tensor import Tensor, as_tensor, make_result, result_dtype


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (the inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _binary_inputs(a, b):
    dtype = result_dtype(a, b)
    a = as_tensor(a, dtype)
    b = as_tensor(b, dtype)
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"shapes {a.shape} and {b.shape} do not broadcast") from None
    return a, b


def add(a, b):
    a, b = _binary_inputs(a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return make_result(a.data + b.data, (a, b), backward, "add")


def sub(a, b):
    a, b = _binary_inputs(a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return make_result(a.data - b.data, (a, b), backward, "sub")


def mul(a, b):
    a, b = _binary_inputs(a, b)

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return make_result(a.data * b.data, (a, b), backward, "mul")


def div(a, b, eps=0.0):
    """``a / (b + eps)``."""
    a, b = _binary_inputs(a, b)
    denom = b.data + eps
    with np.errstate(divide="ignore", invalid="ignore"):
        out = a.data / denom

    def backward(g):
        ga = g / denom
        gb = -g * out / denom
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return make_result(out, (a, b), backward, "div")


def neg(a):
    a = as_tensor(a)
    return make_result(-a.data, (a,), lambda g: (-g,), "neg")


def power(a, exponent):
    """``a ** exponent`` for a constant scalar exponent."""
    a = as_tensor(a)
    exponent = float(exponent)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = a.data ** exponent

    def backward(g):
        return (g * exponent * a.data ** (exponent - 1.0),)

    return make_result(out, (a,), backward, "power")


def exp(a):
    a = as_tensor(a)
    with np.errstate(over="ignore"):
        out = np.exp(a.data)
    return make_result(out, (a,), lambda g: (g * out,), "exp")


def log(a):
    a = as_tensor(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.data)
    return make_result(out, (a,), lambda g: (g / a.data,), "log")


def sqrt(a):
    a = as_tensor(a)
    with np.errstate(invalid="ignore"):
        out = np.sqrt(a.data)
    return make_result(out, (a,), lambda g: (g * 0.5 / out,), "sqrt")


def abs(a):
    a = as_tensor(a)
    return make_result(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),), "abs")


def relu(a):
    a = as_tensor(a)
    mask = a.data > 0
    return make_result(a.data * mask, (a,), lambda g: (g * mask,), "relu")


def leaky_relu(a, slope=0.1):
    a = as_tensor(a)
    scale = np.where(a.data > 0, 1.0, slope).astype(a.data.dtype)
    return make_result(a.data * scale, (a,), lambda g: (g * scale,), "leaky_relu")


def sigmoid(a):
    a = as_tensor(a)
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return make_result(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def tanh(a):
    a = as_tensor(a)
    out = np.tanh(a.data)
    return make_result(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def softplus(a):
    a = as_tensor(a)
    x = a.data
    out = np.logaddexp(0.0, x)

    def backward(g):
        s = np.empty_like(x)
        pos = x >= 0
        s[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        s[~pos] = ex / (1.0 + ex)
        return (g * s,)

    return make_result(out, (a,), backward, "softplus")


def clip(a, lo, hi):
    """Clamp to ``[lo, hi]``; the gradient is zero where clamping is active."""
    a = as_tensor(a)
    inside = (a.data >= lo) & (a.data <= hi)
    return make_result(np.clip(a.data, lo, hi), (a,), lambda g: (g * inside,), "clip")


def maximum(a, value):
    """Elementwise ``max(a, value)`` against a constant scalar."""
    a = as_tensor(a)
    keep = a.data >= value
    out = np.where(keep, a.data, value)
    return make_result(out, (a,), lambda g: (g * keep,), "maximum")


def _norm_axis(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(ax % ndim for ax in axis)


def sum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    axes = _norm_axis(axis, a.ndim)
    out = a.data.sum(axis=axes, keepdims=keepdims)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape).copy(),)

    return make_result(out, (a,), backward, "sum")


def mean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    axes = _norm_axis(axis, a.ndim)
    count = int(np.prod([a.shape[ax] for ax in axes])) if axes else 1
    out = a.data.mean(axis=axes, keepdims=keepdims)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g / count, a.shape).copy(),)

    return make_result(out, (a,), backward, "mean")


def reshape(a, shape):
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError as exc:
        raise DimensionError(str(exc)) from None
    return make_result(out, (a,), lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a, axes=None):
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inverse = np.argsort(axes)
    return make_result(np.transpose(a.data, axes), (a,),
                       lambda g: (np.transpose(g, inverse),), "transpose")


def getitem(a, index):
    """Basic or integer-array indexing; backward scatters into a zero array."""
    a = as_tensor(a)
    out = a.data[index]

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        return (full,)

    return make_result(out, (a,), backward, "getitem")


def concat(tensors, axis=1):
    tensors = [as_tensor(t) for t in tensors]
    dtype = result_dtype(*tensors)
    tensors = [t if t.data.dtype == dtype else as_tensor(t.data, dtype) for t in tensors]
    ndim = tensors[0].ndim
    axis = axis % ndim
    for t in tensors[1:]:
        if t.ndim != ndim or any(t.shape[i] != tensors[0].shape[i]
                                 for i in range(ndim) if i != axis):
            raise DimensionError(
                f"cannot concat shapes {[t.shape for t in tensors]} along axis {axis}")
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)
    out = np.concatenate([t.data for t in tensors], axis=axis)

    def backward(g):
        return tuple(np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis)
                     for i in range(len(tensors)))

    return make_result(out, tensors, backward, "concat")


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    expanded = [reshape(t, t.shape[:axis] + (1,) + t.shape[axis:]) for t in tensors]
    return concat(expanded, axis=axis)


def matmul(a, b):
    """Matrix product of 2-D (or batched, broadcast-compatible) tensors."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shape mismatch {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def backward(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return make_result(out, (a, b), backward, "matmul")


def gather(a, indices, axis=0):
    """Select slices of ``a`` along ``axis``; indices may repeat."""
    a = as_tensor(a)
    indices = np.asarray(indices, dtype=np.int64)
    axis = axis % a.ndim
    if indices.size and (indices.min() < 0 or indices.max() >= a.shape[axis]):
        raise DimensionError(f"gather index out of range for axis of size {a.shape[axis]}")
    out = np.take(a.data, indices, axis=axis)

    def backward(g):
        full = np.zeros_like(a.data)
        moved = np.moveaxis(full, axis, 0)
        gm = np.moveaxis(g, list(range(axis, axis + indices.ndim)),
                         list(range(indices.ndim)))
        np.add.at(moved, indices, gm)
        return (full,)

    return make_result(out, (a,), backward, "gather")


def scatter_add(values, indices, size, axis=0):
    """Sum slices of ``values`` into a zero tensor of length ``size`` along ``axis``.

    Repeated indices accumulate. Backward is a gather with the same indices.
    """
    values = as_tensor(values)
    indices = np.asarray(indices, dtype=np.int64)
    axis = axis % values.ndim
    if indices.ndim != 1 or indices.shape[0] != values.shape[axis]:
        raise DimensionError(
            f"scatter_add needs one index per slice: {indices.shape} vs {values.shape}")
    if indices.size and (indices.min() < 0 or indices.max() >= size):
        raise DimensionError(f"scatter_add index out of range for size {size}")
    shape = list(values.shape)
    shape[axis] = size
    out = np.zeros(shape, dtype=values.data.dtype)
    np.add.at(np.moveaxis(out, axis, 0), indices, np.moveaxis(values.data, axis, 0))

    def backward(g):
        return (np.take(g, indices, axis=axis),)

    return make_result(out, (values,), backward, "scatter_add")


def where(condition, a, b):
    """Select ``a`` where the constant ``condition`` holds, else ``b``."""
    a, b = _binary_inputs(a, b)
    condition = np.asarray(condition, dtype=bool)
    out = np.where(condition, a.data, b.data)

    def backward(g):
        return (_unbroadcast(np.where(condition, g, 0.0), a.shape),
                _unbroadcast(np.where(condition, 0.0, g), b.shape))

    return make_result(out, (a, b), backward, "where")


__all__ = [
    "Tensor", "add", "sub", "mul", "div", "neg", "power", "exp", "log", "sqrt", "abs",
    "relu", "leaky_relu", "sigmoid", "tanh", "softplus", "clip", "maximum", "sum",
    "mean", "reshape", "transpose", "getitem", "concat", "stack", "matmul", "gather",
    "scatter_add", "where",
]
