"""Tensor type and the reverse-mode tape.

Every differentiable op records its output on an implicit tape by stamping
it with a monotonically increasing execution index. ``backward`` replays the
reachable part of the tape in strictly decreasing index order, which is the
exact reverse of execution order, and accumulates gradients additively at
fan-out nodes.
"""

import contextlib
import itertools

import numpy as np

from ..errors import ContractError, NumericError

_default_dtype = np.float32
_tape_counter = itertools.count()


def set_default_dtype(dtype):
    """Set the float precision used for newly created tensors."""
    global _default_dtype
    dtype = np.dtype(dtype).type
    if dtype not in (np.float32, np.float64):
        raise ContractError(f"unsupported dtype {dtype!r}; use float32 or float64")
    _default_dtype = dtype


def get_default_dtype():
    return _default_dtype


@contextlib.contextmanager
def precision(dtype):
    """Temporarily switch the default tensor precision."""
    previous = _default_dtype
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(previous)


class Tensor:
    """n-dimensional float array that can take part in reverse-mode differentiation.

    Parameters
    ----------
    data : array_like
        Values; converted to the default precision unless ``dtype`` is given.
    requires_grad : bool
        Whether gradients should be accumulated into this tensor.
    dtype : optional
        Explicit precision (``np.float32`` or ``np.float64``).
    """

    __array_priority__ = 100
    __array_ufunc__ = None

    def __init__(self, data, requires_grad=False, dtype=None):
        dtype = _default_dtype if dtype is None else np.dtype(dtype).type
        self.data = np.asarray(data, dtype=dtype, order="C")
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward = None
        self._op = None
        self._index = -1

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def is_leaf(self):
        return self._backward is None

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else self.data.item()

    def detach(self):
        return Tensor(self.data.copy(), dtype=self.data.dtype)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name}{flag})"

    def __len__(self):
        return self.data.shape[0]

    # Operator sugar; implementations live in ops.py.
    def __add__(self, other):
        from .ops import add
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from .ops import sub
        return sub(self, other)

    def __rsub__(self, other):
        from .ops import sub
        return sub(other, self)

    def __mul__(self, other):
        from .ops import mul
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        from .ops import div
        return div(self, other)

    def __rtruediv__(self, other):
        from .ops import div
        return div(other, self)

    def __neg__(self):
        from .ops import neg
        return neg(self)

    def __pow__(self, exponent):
        from .ops import power
        return power(self, exponent)

    def __matmul__(self, other):
        from .ops import matmul
        return matmul(self, other)

    def __getitem__(self, index):
        from .ops import getitem
        return getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        from .ops import sum as _sum
        return _sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        from .ops import mean
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        from .ops import reshape
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        from .ops import transpose
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def backward(self):
        return backward(self)


def as_tensor(value, dtype=None):
    """Wrap ``value`` as a constant tensor unless it already is one."""
    if isinstance(value, Tensor):
        return value
    if dtype is None:
        dtype = _default_dtype
    return Tensor(value, dtype=dtype)


def result_dtype(*tensors):
    """Common precision of the given tensors (float64 wins)."""
    for t in tensors:
        if isinstance(t, Tensor) and t.data.dtype == np.float64:
            return np.float64
    for t in tensors:
        if isinstance(t, Tensor):
            return t.data.dtype.type
    return _default_dtype


def make_result(data, parents, backward_fn, op):
    """Wrap an op's forward output and record it on the tape.

    ``backward_fn(grad_out)`` must return one gradient (or None) per parent.
    Raises NumericError if the forward value is not finite.
    """
    parents = tuple(parents)
    dtype = result_dtype(*parents)
    data = np.asarray(data, dtype=dtype)
    if not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite value produced by op '{op}'")
    out = Tensor(data, dtype=dtype)
    out._op = op
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
        out._index = next(_tape_counter)
    return out


def _reachable(root):
    seen = {}
    stack = [root]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen[id(node)] = node
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append(p)
    return list(seen.values())


def backward(loss):
    """Backpropagate from a scalar ``loss``.

    Gradients are accumulated into ``.grad`` of every reachable leaf that has
    ``requires_grad``; the same gradients are returned as a dict keyed by the
    leaf tensor.
    """
    if not isinstance(loss, Tensor):
        raise ContractError("backward expects a Tensor")
    if loss.data.size != 1:
        raise ContractError(f"backward expects a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ContractError("loss does not depend on any tensor with requires_grad")

    nodes = _reachable(loss)
    interior = sorted((n for n in nodes if n._backward is not None),
                      key=lambda n: n._index, reverse=True)
    grads = {id(loss): np.ones_like(loss.data)}
    for node in interior:
        g = grads.pop(id(node), None)
        if g is None:
            continue
        parent_grads = node._backward(g)
        for parent, pg in zip(node._parents, parent_grads):
            if pg is None or not parent.requires_grad:
                continue
            pg = np.asarray(pg, dtype=parent.data.dtype)
            if pg.shape != parent.data.shape:
                raise ContractError(
                    f"op '{node._op}' returned gradient of shape {pg.shape} "
                    f"for input of shape {parent.data.shape}")
            if not np.all(np.isfinite(pg)):
                raise NumericError(f"non-finite gradient in backward of op '{node._op}'")
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg

    result = {}
    for node in nodes:
        if node._backward is None and node.requires_grad:
            g = grads.get(id(node))
            if g is None:
                g = np.zeros_like(node.data)
            node.grad = g if node.grad is None else node.grad + g
            result[node] = g
    return result
