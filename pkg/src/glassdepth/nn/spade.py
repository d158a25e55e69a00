"""Spatially-adaptive normalisation conditioned on an object mask."""

import numpy as np

from .. import autodiff as ad
from ..geometry import resize_nearest
from .layers import Conv, Module

SPADE_EPS = 1e-5


def spade_modulate(h, gamma, beta, eps=SPADE_EPS):
    """``gamma * (h - mu_c) / sigma_c + beta`` with per-channel batch statistics.

    ``mu_c`` and ``sigma_c`` pool over batch and spatial sites of channel c;
    ``sigma_c = sqrt(max(E[h^2] - mu_c^2, 0) + eps)``.
    """
    h = ad.as_tensor(h)
    axes = (0, 2, 3)
    mu = h.mean(axis=axes, keepdims=True)
    second = (h * h).mean(axis=axes, keepdims=True)
    var = ad.maximum(second - mu * mu, 0.0)
    sigma = ad.sqrt(var + eps)
    return gamma * ((h - mu) / sigma) + beta


def resize_mask(mask, height, width):
    """Nearest-resize an (N, H, W) or (N, 1, H, W) mask batch to (N, 1, height, width)."""
    mask = np.asarray(mask, dtype=np.float64)
    if mask.ndim == 4:
        mask = mask[:, 0]
    out = np.stack([resize_nearest(m, width, height) for m in mask])
    return out[:, None]


class SpadeParams(Module):
    """Small conv net mapping the mask to per-site scale and bias maps."""

    def __init__(self, channels, rng, hidden=16, eps=SPADE_EPS):
        self.shared = Conv(1, hidden, 3, rng, padding=1)
        self.gamma = Conv(hidden, channels, 3, rng, padding=1, bias_init=1.0, gain=0.1)
        self.beta = Conv(hidden, channels, 3, rng, padding=1, gain=0.1)
        self._eps = eps

    @classmethod
    def constant(cls, channels, gamma=1.0, beta=0.0, hidden=4, eps=SPADE_EPS):
        """Parameters producing spatially constant gamma and beta (zero weights)."""
        params = cls(channels, np.random.default_rng(0), hidden=hidden, eps=eps)
        for conv in (params.shared, params.gamma, params.beta):
            conv.weight.data[...] = 0.0
        params.gamma.bias.data[...] = gamma
        params.beta.bias.data[...] = beta
        return params

    @property
    def eps(self):
        return self._eps

    def modulation(self, mask):
        """gamma(m), beta(m) for a (N, 1, H, W) mask already at the target size."""
        actv = ad.leaky_relu(self.shared(mask), 0.1)
        return self.gamma(actv), self.beta(actv)


def spade_normalize(h, mask, params):
    """SPADE block on an NCHW activation; ``mask`` is resized to h's spatial size."""
    h = ad.as_tensor(h)
    m = resize_mask(mask, h.shape[2], h.shape[3]).astype(h.data.dtype)
    gamma, beta = params.modulation(ad.Tensor(m, dtype=h.data.dtype))
    return spade_modulate(h, gamma, beta, params.eps)
