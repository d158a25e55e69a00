"""Depth completion encoder-decoder with mask-conditioned SPADE decoder blocks."""

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..errors import DimensionError
from .layers import Conv, Module
from .spade import SpadeParams, spade_normalize

STAGES = 4


@dataclass(frozen=True)
class DcConfig:
    channels: tuple = (16, 16, 32, 32, 48)  # full-resolution stem + 4 stride-2 stages
    spade_hidden: int = 16
    max_depth: float = 3.0
    init_depth: float = 0.6
    seed: int = 0


class DecoderBlock(Module):
    """Upsample, join the skip, convolve, then SPADE-modulate by the mask."""

    def __init__(self, in_channels, skip_channels, out_channels, rng, spade_hidden):
        self.conv = Conv(in_channels + skip_channels, out_channels, 3, rng, padding=1)
        self.spade = SpadeParams(out_channels, rng, hidden=spade_hidden)

    def __call__(self, x, skip, mask):
        x = ad.concat([ad.upsample_nearest(x, 2), skip], axis=1)
        x = self.conv(x)
        return ad.leaky_relu(spade_normalize(x, mask, self.spade), 0.1)


class DcNetwork(Module):
    """RGB + depth in (4 channels), strictly positive full-resolution depth out.

    The output head is ``max_depth * sigmoid(.)``; its bias starts at the
    logit of ``init_depth / max_depth``.
    """

    def __init__(self, config=DcConfig()):
        self._config = config
        rng = np.random.default_rng(config.seed)
        ch = tuple(config.channels)
        if len(ch) != STAGES + 1:
            raise ValueError(f"DC channels must list stem + {STAGES} stages")
        self.stem = Conv(4, ch[0], 3, rng, padding=1)
        self.encoder = [Conv(ch[i], ch[i + 1], 3, rng, stride=2, padding=1)
                        for i in range(STAGES)]
        self.decoder = [DecoderBlock(ch[i + 1], ch[i], ch[i], rng, config.spade_hidden)
                        for i in range(STAGES)]
        p = config.init_depth / config.max_depth
        self.head = Conv(ch[0], 1, 3, rng, padding=1, bias_init=float(np.log(p / (1 - p))),
                         gain=0.1)

    @property
    def config(self):
        return self._config

    def forward_tensor(self, x, mask):
        """x: (N, 4, H, W) with H, W divisible by 16; mask: (N, 1, H, W). Returns (N, 1, H, W)."""
        skips = [ad.leaky_relu(self.stem(x), 0.1)]
        for conv in self.encoder:
            skips.append(ad.leaky_relu(conv(skips[-1]), 0.1))
        y = skips[-1]
        for i in reversed(range(STAGES)):
            y = self.decoder[i](y, skips[i], mask)
        return ad.sigmoid(self.head(y)) * self._config.max_depth

    def __call__(self, rgb, depth, mask):
        return self.predict(rgb, depth, mask)

    def predict(self, rgb, depth, mask):
        """Differentiable prediction for a batch; returns an (N, 1, H, W) tensor.

        ``rgb`` (N, H, W, 3) in [0, 255] or [0, 1]; ``depth`` and ``mask`` (N, H, W).
        Inputs are zero-padded to a multiple of 16 and the output cropped back.
        """
        x, m, (h, w) = prepare_inputs(rgb, depth, mask, self.dtype)
        out = self.forward_tensor(ad.Tensor(x, dtype=self.dtype), m)
        return out[:, :, :h, :w]


def prepare_inputs(rgb, depth, mask, dtype=np.float32):
    rgb = np.asarray(rgb)
    depth = np.asarray(depth, dtype=np.float64)
    mask = np.asarray(mask)
    if rgb.ndim == 3:
        rgb, depth, mask = rgb[None], depth[None], mask[None]
    if not (rgb.shape[:3] == depth.shape == mask.shape):
        raise DimensionError(
            f"rgb {rgb.shape[:3]}, depth {depth.shape} and mask {mask.shape} must match")
    n, h, w = depth.shape
    scale = 255.0 if rgb.dtype == np.uint8 else 1.0
    x = np.concatenate([np.moveaxis(rgb.astype(np.float64) / scale, -1, 1),
                        depth[:, None]], axis=1)
    m = (mask > 0).astype(np.float64)[:, None]
    unit = 2 ** STAGES
    ph, pw = (-h) % unit, (-w) % unit
    if ph or pw:
        x = np.pad(x, ((0, 0), (0, 0), (0, ph), (0, pw)))
        m = np.pad(m, ((0, 0), (0, 0), (0, ph), (0, pw)))
    return x.astype(dtype), m.astype(dtype), (h, w)


def dc_forward(rgb, depth, mask, net):
    """Inference for one frame: returns an (H, W) float64 depth map, all values > 0."""
    out = net.predict(rgb, depth, mask)
    return out.data[0, 0].astype(np.float64)
