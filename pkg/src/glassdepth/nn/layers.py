"""Parameter containers and the handful of layers the two networks use."""

import numpy as np

from .. import autodiff as ad
from ..autodiff import checkpoint
from ..errors import ContractError


class Module:
    """Base class: parameters are Tensor attributes, children are Module attributes.

    Parameter names are dotted attribute paths in definition order, which
    fixes the checkpoint record order.
    """

    def named_parameters(self, prefix=""):
        for name, value in vars(self).items():
            if name.startswith("_"):
                continue
            full = f"{prefix}{name}"
            if isinstance(value, ad.Tensor) and value.requires_grad:
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_parameters(full + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{full}.{i}.")

    def parameters(self):
        return dict(self.named_parameters())

    def zero_grad(self):
        for p in self.parameters().values():
            p.grad = None

    def state_dict(self):
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state):
        params = self.parameters()
        missing = set(params) - set(state)
        unexpected = set(state) - set(params)
        if missing or unexpected:
            raise ContractError(
                f"checkpoint mismatch: missing {sorted(missing)}, unexpected {sorted(unexpected)}")
        for name, p in params.items():
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise ContractError(f"parameter {name}: shape {value.shape} != {p.shape}")
            p.data = value.astype(p.data.dtype).copy()

    def save(self, path):
        checkpoint.save(path, self.state_dict())

    def load(self, path):
        self.load_state_dict(checkpoint.load(path))

    @property
    def dtype(self):
        """Precision of the first parameter (the default precision if none)."""
        for p in self.parameters().values():
            return p.data.dtype.type
        return ad.get_default_dtype()

    def astype(self, dtype):
        for p in self.parameters().values():
            p.data = p.data.astype(dtype)
        return self


def _param(value):
    return ad.Tensor(value, requires_grad=True)


class Conv(Module):
    """Rank-2 or rank-3 convolution with bias; He-normal initialisation."""

    def __init__(self, in_channels, out_channels, kernel_size, rng, stride=1, padding=0,
                 rank=2, bias_init=0.0, gain=1.0):
        shape = (out_channels, in_channels) + (kernel_size,) * rank
        fan_in = in_channels * kernel_size ** rank
        self.weight = _param(rng.normal(0.0, gain * np.sqrt(2.0 / fan_in), size=shape))
        self.bias = _param(np.full(out_channels, bias_init))
        self._stride = stride
        self._padding = padding
        self._rank = rank

    def __call__(self, x):
        y = ad.conv(x, self.weight, stride=self._stride, padding=self._padding)
        return y + self.bias.reshape((1, -1) + (1,) * self._rank)


class ConvTranspose(Module):
    """Transposed convolution with bias; kernel layout (in, out, *k)."""

    def __init__(self, in_channels, out_channels, kernel_size, rng, stride=2, padding=0, rank=3):
        shape = (in_channels, out_channels) + (kernel_size,) * rank
        fan_in = in_channels * kernel_size ** rank / stride ** rank
        self.weight = _param(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape))
        self.bias = _param(np.zeros(out_channels))
        self._stride = stride
        self._padding = padding
        self._rank = rank

    def __call__(self, x):
        y = ad.conv_transpose(x, self.weight, stride=self._stride, padding=self._padding)
        return y + self.bias.reshape((1, -1) + (1,) * self._rank)


class Linear(Module):
    def __init__(self, in_features, out_features, rng, gain=1.0):
        self.weight = _param(rng.normal(0.0, gain * np.sqrt(2.0 / in_features),
                                        size=(in_features, out_features)))
        self.bias = _param(np.zeros(out_features))

    def __call__(self, x):
        return x @ self.weight + self.bias
