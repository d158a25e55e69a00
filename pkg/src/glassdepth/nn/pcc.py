"""Point cloud completion: gridding, 3D U-Net, gridding reverse and an MLP refiner."""

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..errors import ContractError, EmptyCloudError
from ..geometry import PointCloud
from ..gridding import (
    GridBounds, gridding, gridding_loss, gridding_reverse, normalize_cloud, num_vertices,
    sample_cell_features,
)
from .layers import Conv, ConvTranspose, Linear, Module


@dataclass(frozen=True)
class PccConfig:
    n_g: int = 32
    half_extent: float = 0.15
    num_points: int = 2048
    channels: tuple = (16, 32, 32, 64, 64)  # stem + 4 encoder stages
    mlp_hidden: int = 32
    max_offset: float = 2.0  # grid cells
    reverse_threshold: float = 0.0
    seed: int = 0


@dataclass
class PccOutput:
    points: ad.Tensor  # (M, 3) camera frame
    refined: ad.Tensor  # (K, 3) grid coordinates before resampling
    coarse: ad.Tensor  # (K, 3) grid coordinates from gridding reverse
    pred_weights: ad.Tensor  # ((n_g+1)^3,) rectified vertex weights
    input_weights: ad.Tensor
    grid_logits: ad.Tensor  # head output before rectification
    bounds: GridBounds
    n_g: int

    def cloud(self):
        return PointCloud(self.points.data.astype(np.float64))


def _stage_sizes(n_g, stages):
    sizes = [n_g + 1]
    for _ in range(stages):
        sizes.append((sizes[-1] + 2 - 3) // 2 + 1)
    return sizes


class PccNetwork(Module):
    """3D encoder-decoder over the gridded cloud with additive skip connections.

    The decoder's last feature map is sampled at every coarse point and fed,
    with the point's coordinates, to a per-point MLP that predicts a bounded
    offset.
    """

    def __init__(self, config=PccConfig()):
        self._config = config
        rng = np.random.default_rng(config.seed)
        ch = tuple(config.channels)
        if len(ch) != 5:
            raise ContractError("PCC channels must list stem + 4 encoder stages")
        sizes = _stage_sizes(config.n_g, 4)
        for i in range(4):
            back = (sizes[i + 1] - 1) * 2 - 2 + 3
            if back != sizes[i] or sizes[i + 1] < 1:
                raise ContractError(
                    f"n_g={config.n_g} gives inconsistent U-Net stage sizes {sizes}; "
                    "use a power of two >= 16")
        self.stem = Conv(1, ch[0], 3, rng, padding=1, rank=3)
        self.encoder = [Conv(ch[i], ch[i + 1], 3, rng, stride=2, padding=1, rank=3)
                        for i in range(4)]
        self.decoder = [ConvTranspose(ch[i + 1], ch[i], 3, rng, stride=2, padding=1, rank=3)
                        for i in range(4)]
        self.head = Conv(ch[0], 1, 1, rng, rank=3)
        self.refiner = [Linear(3 + ch[0], config.mlp_hidden, rng),
                        Linear(config.mlp_hidden, config.mlp_hidden, rng),
                        Linear(config.mlp_hidden, 3, rng, gain=0.1)]

    @property
    def config(self):
        return self._config

    def grid_forward(self, weights):
        """Vertex weights in, (head output, decoder features) out.

        The head output is unrectified; the predicted grid is its positive part.
        """
        n = self._config.n_g + 1
        x = ad.reshape(ad.as_tensor(weights), (1, 1, n, n, n))
        skips = [ad.leaky_relu(self.stem(x), 0.1)]
        for conv in self.encoder:
            skips.append(ad.leaky_relu(conv(skips[-1]), 0.1))
        y = skips[-1]
        for i in reversed(range(4)):
            y = ad.leaky_relu(self.decoder[i](y), 0.1) + skips[i]
        return self.head(y).reshape(-1), y[0]

    def refine(self, coarse, features):
        """Offset each coarse point by an MLP over its coordinates and sampled features.

        Coarse points and features enter as constants: the refiner learns from
        the cloud term alone and the 3D network from the grid term alone.
        """
        n_g = self._config.n_g
        coarse = ad.Tensor(coarse.data)
        features = ad.Tensor(features.data)
        sampled = sample_cell_features(coarse, features, n_g).values
        coords = sampled[:, :3] * (2.0 / n_g) - 1.0
        h = ad.concat([coords, sampled[:, 3:]], axis=1)
        for layer in self.refiner[:-1]:
            h = ad.leaky_relu(layer(h), 0.1)
        offsets = ad.tanh(self.refiner[-1](h)) * self._config.max_offset
        return coarse + offsets

    def forward(self, cloud, bounds=None, rng=None):
        """Complete one object's raw cloud; returns exactly ``num_points`` points.

        Raises EmptyCloudError if nothing survives bounds filtering or the
        decoder predicts an empty grid.
        """
        cfg = self._config
        if bounds is None:
            bounds = GridBounds.around(cloud.points, cfg.half_extent)
        norm = normalize_cloud(cloud, bounds, cfg.n_g)
        grid_in = gridding(ad.Tensor(norm.points, dtype=self.dtype), cfg.n_g)
        logits, features = self.grid_forward(grid_in)
        pred = ad.relu(logits)
        coarse = gridding_reverse(pred, cfg.n_g, cfg.reverse_threshold).points
        if coarse.shape[0] == 0:
            raise EmptyCloudError("decoder produced an empty grid")
        refined = self.refine(coarse, features)
        idx = _resample_index(refined.shape[0], cfg.num_points,
                              np.random.default_rng(cfg.seed) if rng is None else rng)
        points = bounds.to_world(ad.gather(refined, idx), cfg.n_g)
        return PccOutput(points, refined, coarse, pred, grid_in, logits, bounds, cfg.n_g)

    __call__ = forward

    def loss(self, output, gt_points=None, gt=None):
        """Training objective and the gridding loss of the predicted grid.

        The objective is the gridding loss of the unrectified head output plus
        that of the gridded refined cloud (which only trains the refiner).
        Ground-truth weights are non-negative, so rectifying never increases an
        L1 term and the returned gridding loss of the rectified grid is at most
        the first term. Unlike a loss taken after rectification, the objective
        keeps a gradient at vertices the head currently predicts as empty.

        ``gt_points`` are camera-frame points normalised with the output's
        bounds (points outside the cube are ignored); alternatively pass a
        precomputed ``gt`` grid.
        """
        if gt is None:
            gt = gt_grid(gt_points, output.bounds, self._config.n_g,
                         output.pred_weights.data.dtype)
        refined = ad.clip(output.refined, 0.0, float(self._config.n_g))
        cloud_loss = gridding_loss(gridding(refined, self._config.n_g), gt)
        objective = gridding_loss(output.grid_logits, gt) + cloud_loss
        return objective, gridding_loss(output.pred_weights, gt)


def gt_grid(points, bounds, n_g, dtype=np.float64):
    """Gridding of a ground-truth cloud in the given bounds; zeros if none fall inside."""
    try:
        norm = normalize_cloud(PointCloud(points), bounds, n_g)
    except EmptyCloudError:
        return ad.Tensor(np.zeros(num_vertices(n_g)), dtype=dtype)
    return gridding(ad.Tensor(norm.points, dtype=dtype), n_g)


def _resample_index(k, m, rng):
    """Indices giving exactly ``m`` of ``k`` points.

    With ``k >= m`` a uniform subset without replacement; otherwise every point
    once plus ``m - k`` uniform draws with replacement. Returned sorted so the
    output order follows grid order.
    """
    if k >= m:
        idx = rng.choice(k, size=m, replace=False)
    else:
        idx = np.concatenate([np.arange(k), rng.integers(0, k, size=m - k)])
    return np.sort(idx)


def pcc_forward(raw_object_cloud, net, bounds=None, rng=None):
    """Inference wrapper returning the completed camera-frame PointCloud."""
    if raw_object_cloud.empty:
        raise EmptyCloudError("raw object cloud is empty")
    return net.forward(raw_object_cloud, bounds=bounds, rng=rng).cloud()
