"""Strided convolution, transposed convolution and nearest upsampling (rank 2 and 3)."""

import itertools

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DimensionError
from .tensor import as_tensor, make_result, result_dtype


def _tuple(value, rank, name):
    if np.isscalar(value):
        value = (int(value),) * rank
    value = tuple(int(v) for v in value)
    if len(value) != rank:
        raise DimensionError(f"{name} needs {rank} entries, got {value}")
    return value


def _windows(xpad, ksize, stride):
    """View of all kernel windows: (N, C, *out, *ksize)."""
    rank = len(ksize)
    spatial = tuple(range(2, 2 + rank))
    win = sliding_window_view(xpad, ksize, axis=spatial)
    step = (slice(None), slice(None)) + tuple(slice(None, None, s) for s in stride)
    return win[step]


def _col2im(cols, padded_shape, ksize, stride):
    """Adjoint of ``_windows``: scatter-add (N, *out, C, *ksize) columns into an array."""
    rank = len(ksize)
    out_shape = cols.shape[1:1 + rank]
    result = np.zeros(padded_shape, dtype=cols.dtype)
    # (N, *out, C, *k) -> (N, C, *out, *k)
    cols = np.moveaxis(cols, 1 + rank, 1)
    for offset in itertools.product(*(range(k) for k in ksize)):
        target = (slice(None), slice(None)) + tuple(
            slice(o, o + s * (n - 1) + 1, s) for o, s, n in zip(offset, stride, out_shape))
        result[target] += cols[(Ellipsis,) + offset]
    return result


def _check(x, w, rank, transposed):
    if x.ndim != rank + 2 or w.ndim != rank + 2:
        raise DimensionError(
            f"rank-{rank} convolution needs {rank + 2}-D input and kernel, "
            f"got {x.shape} and {w.shape}")
    in_channels = w.shape[0] if transposed else w.shape[1]
    if x.shape[1] != in_channels:
        raise DimensionError(
            f"input has {x.shape[1]} channels but kernel expects {in_channels}")


def conv(x, w, stride=1, padding=0):
    """Cross-correlation of ``x`` (N, C, *S) with kernel ``w`` (F, C, *K), zero padding.

    The rank (2 or 3) follows from the kernel. Output spatial size per axis is
    ``(in + 2*pad - k) // stride + 1``.
    """
    x, w = as_tensor(x), as_tensor(w)
    rank = w.ndim - 2
    if rank not in (2, 3):
        raise DimensionError(f"only rank 2 and 3 convolutions are supported, got kernel {w.shape}")
    _check(x, w, rank, transposed=False)
    dtype = result_dtype(x, w)
    stride = _tuple(stride, rank, "stride")
    padding = _tuple(padding, rank, "padding")
    if min(stride) < 1:
        raise DimensionError("stride must be >= 1")
    ksize = w.shape[2:]
    pad_width = ((0, 0), (0, 0)) + tuple((p, p) for p in padding)
    xpad = np.pad(x.data.astype(dtype, copy=False), pad_width)
    if any(xpad.shape[2 + i] < ksize[i] for i in range(rank)):
        raise DimensionError(f"kernel {ksize} larger than padded input {xpad.shape[2:]}")
    win = _windows(xpad, ksize, stride)
    caxes = [1] + list(range(2 + rank, 2 + 2 * rank))
    wdata = w.data.astype(dtype, copy=False)
    out = np.tensordot(win, wdata, axes=(caxes, [1] + list(range(2, 2 + rank))))
    out = np.moveaxis(out, -1, 1)

    def backward(g):
        # dL/dw: contract over batch and output positions.
        oaxes = [0] + list(range(2, 2 + rank))
        gw = np.tensordot(g, win, axes=(oaxes, oaxes))
        gcols = np.tensordot(g, wdata, axes=([1], [0]))  # (N, *out, C, *k)
        gxpad = _col2im(gcols, xpad.shape, ksize, stride)
        crop = (slice(None), slice(None)) + tuple(
            slice(p, p + n) for p, n in zip(padding, x.shape[2:]))
        return gxpad[crop], gw

    return make_result(out, (x, w), backward, f"conv{rank}d")


def conv_transpose(x, w, stride=1, padding=0):
    """Transposed convolution of ``x`` (N, F, *S) with kernel ``w`` (F, C, *K).

    This is the adjoint of ``conv`` with the same kernel, stride and padding.
    Output spatial size per axis is ``(in - 1)*stride - 2*pad + k``.
    """
    x, w = as_tensor(x), as_tensor(w)
    rank = w.ndim - 2
    if rank not in (2, 3):
        raise DimensionError(f"only rank 2 and 3 convolutions are supported, got kernel {w.shape}")
    _check(x, w, rank, transposed=True)
    dtype = result_dtype(x, w)
    stride = _tuple(stride, rank, "stride")
    padding = _tuple(padding, rank, "padding")
    if min(stride) < 1:
        raise DimensionError("stride must be >= 1")
    ksize = w.shape[2:]
    in_spatial = x.shape[2:]
    full = tuple((n - 1) * s + k for n, s, k in zip(in_spatial, stride, ksize))
    out_spatial = tuple(f - 2 * p for f, p in zip(full, padding))
    if min(out_spatial) < 1:
        raise DimensionError(f"transposed convolution output would be empty: {out_spatial}")
    xdata = x.data.astype(dtype, copy=False)
    wdata = w.data.astype(dtype, copy=False)
    cols = np.tensordot(xdata, wdata, axes=([1], [0]))  # (N, *S, C, *k)
    ypad = _col2im(cols, (x.shape[0], w.shape[1]) + full, ksize, stride)
    crop = (slice(None), slice(None)) + tuple(
        slice(p, p + n) for p, n in zip(padding, out_spatial))
    out = ypad[crop]

    def backward(g):
        pad_width = ((0, 0), (0, 0)) + tuple((p, p) for p in padding)
        gpad = np.pad(g, pad_width)
        win = _windows(gpad, ksize, stride)  # (N, C, *S, *k)
        kaxes = list(range(2 + rank, 2 + 2 * rank))
        gx = np.tensordot(win, wdata, axes=([1] + kaxes, [1] + list(range(2, 2 + rank))))
        gx = np.moveaxis(gx, -1, 1)
        saxes = [0] + list(range(2, 2 + rank))
        gw = np.tensordot(xdata, win, axes=(saxes, saxes))
        return gx, gw

    return make_result(out, (x, w), backward, f"conv_transpose{rank}d")


def upsample_nearest(x, factor=2):
    """Repeat every spatial site ``factor`` times along each spatial axis."""
    x = as_tensor(x)
    rank = x.ndim - 2
    out = x.data
    for ax in range(2, 2 + rank):
        out = np.repeat(out, factor, axis=ax)

    def backward(g):
        shape = list(g.shape[:2])
        for n in x.shape[2:]:
            shape += [n, factor]
        g = g.reshape(shape)
        return (g.sum(axis=tuple(range(3, 3 + 2 * rank, 2))),)

    return make_result(out, (x,), backward, "upsample_nearest")
