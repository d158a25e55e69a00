"""Central finite-difference gradient checking."""

import numpy as np

from ..errors import ContractError, NumericError
from .tensor import Tensor, backward


def numeric_gradient(function, inputs, eps=1e-4, index=0):
    """Central-difference gradient of ``function(*inputs)`` w.r.t. ``inputs[index]``.

    The step for coordinate ``x`` is ``eps * max(1, |x|)``.
    """
    target = inputs[index]
    grad = np.zeros_like(target.data, dtype=np.float64)
    flat = target.data.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        h = eps * max(1.0, abs(float(original)))
        flat[i] = original + h
        up = _scalar(function(*inputs))
        flat[i] = original - h
        down = _scalar(function(*inputs))
        flat[i] = original
        grad.reshape(-1)[i] = (up - down) / (2.0 * h)
    return grad


def _scalar(value):
    data = value.data if isinstance(value, Tensor) else np.asarray(value)
    if data.size != 1:
        raise ContractError(f"function must return a scalar, got shape {data.shape}")
    result = float(data.reshape(-1)[0])
    if not np.isfinite(result):
        raise NumericError("function returned a non-finite value during gradient check")
    return result


def grad_check(function, inputs, eps=1e-4, reference_dtype=None):
    """Largest relative error between backprop and central differences.

    ``inputs`` is a sequence of tensors; each one with ``requires_grad`` is
    checked. The per-coordinate error is
    ``|analytic - numeric| / max(1e-8, |analytic| + |numeric|)``.

    With ``reference_dtype`` (e.g. float64 for a float32 graph) the
    differences are taken on copies of the inputs in that precision, so the
    check measures the backprop error rather than finite-difference rounding.
    """
    inputs = list(inputs)
    reference = inputs
    if reference_dtype is not None:
        reference = [Tensor(t.data, requires_grad=t.requires_grad, dtype=reference_dtype)
                     for t in inputs]
    for t in inputs:
        if not np.all(np.isfinite(t.data)):
            raise NumericError("grad_check inputs must be finite")
        t.grad = None
    out = function(*inputs)
    if not isinstance(out, Tensor) or out.data.size != 1:
        raise ContractError("grad_check function must return a scalar Tensor")
    backward(out)
    worst = 0.0
    for i, t in enumerate(inputs):
        if not t.requires_grad:
            continue
        analytic = np.zeros_like(t.data, dtype=np.float64) if t.grad is None \
            else t.grad.astype(np.float64)
        numeric = numeric_gradient(function, reference, eps=eps, index=i)
        denom = np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))
        if analytic.size:
            worst = max(worst, float(np.max(np.abs(analytic - numeric) / denom)))
        t.grad = None
    return worst
