"""Differentiable point cloud <-> voxel grid conversions.

Grid coordinates place vertex ``(i, j, k)`` at integer position ``(i, j, k)``
for ``0 <= i, j, k <= n_g``; a grid of resolution ``n_g`` therefore has
``n_g**3`` cells and ``(n_g + 1)**3`` vertices. Vertex weights are stored as
a flat tensor in C order over ``(i, j, k)``.
"""

import itertools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import autodiff as ad
from .errors import ContractError, EmptyCloudError
from .geometry import PointCloud

_CORNERS = np.array(list(itertools.product((0, 1), repeat=3)), dtype=np.int64)  # (8, 3)


@dataclass(frozen=True)
class GridBounds:
    """Axis-aligned cube in metres."""

    center: tuple
    half_extent: float

    def __post_init__(self):
        if not self.half_extent > 0:
            raise ContractError(f"bounds half-extent must be positive, got {self.half_extent}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @classmethod
    def around(cls, points, half_extent=0.15):
        """Cube centred on the centroid of ``points``."""
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if points.shape[0] == 0:
            raise EmptyCloudError("cannot centre bounds on an empty cloud")
        return cls(tuple(points.mean(axis=0)), float(half_extent))

    @property
    def minimum(self):
        return np.asarray(self.center) - self.half_extent

    def to_grid(self, points, n_g):
        return (np.asarray(points, dtype=np.float64) - self.minimum) * (n_g / (2.0 * self.half_extent))

    def to_world(self, grid_points, n_g):
        """Inverse of ``to_grid``; accepts arrays or tensors."""
        scale = 2.0 * self.half_extent / n_g
        if isinstance(grid_points, ad.Tensor):
            return grid_points * scale + self.minimum
        return np.asarray(grid_points, dtype=np.float64) * scale + self.minimum


@dataclass(frozen=True)
class GriddingConfig:
    n_g: int = 32
    half_extent: float = 0.15
    num_points: int = 2048

    def __post_init__(self):
        if self.n_g < 2:
            raise ContractError(f"n_g must be >= 2, got {self.n_g}")
        if self.num_points < 1:
            raise ContractError(f"num_points must be >= 1, got {self.num_points}")


@dataclass
class NormalizedCloud:
    """Points mapped into ``[0, n_g]^3`` grid coordinates."""

    points: np.ndarray
    kept: np.ndarray  # indices into the source cloud
    dropped: int
    bounds: GridBounds
    n_g: int

    def denormalize(self, grid_points=None):
        return self.bounds.to_world(self.points if grid_points is None else grid_points, self.n_g)


def normalize_cloud(cloud, bounds, n_g):
    """Map the bounds cube onto ``[0, n_g]^3``; points outside it are dropped."""
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    pts = pts.reshape(-1, 3)
    grid = bounds.to_grid(pts, n_g)
    inside = np.all((grid >= 0.0) & (grid <= n_g), axis=1)
    kept = np.nonzero(inside)[0]
    if kept.size == 0:
        raise EmptyCloudError(f"no points inside bounds (dropped {pts.shape[0]})")
    return NormalizedCloud(grid[kept], kept, int(pts.shape[0] - kept.size), bounds, n_g)


@dataclass
class VoxelGrid:
    """Vertex weights of an ``n_g`` grid, optionally tagged with world bounds."""

    weights: ad.Tensor
    n_g: int
    bounds: GridBounds = None

    @property
    def shape(self):
        return (self.n_g + 1,) * 3


def num_vertices(n_g):
    return (n_g + 1) ** 3


def vertex_positions(n_g):
    """(V, 3) integer coordinates of all vertices in storage order."""
    r = np.arange(n_g + 1)
    return np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3)


def _flat_index(ijk, n_g):
    m = n_g + 1
    return (ijk[..., 0] * m + ijk[..., 1]) * m + ijk[..., 2]


def corner_weights(points, n_g):
    """Trilinear weights of each point w.r.t. the 8 vertices of its cell.

    Returns ``(weights, vertex_index)``: a differentiable (P, 8) tensor with
    ``w = prod_axis (1 - |p - v|)`` and the (P, 8) flat vertex indices.
    Points must already lie in ``[0, n_g]^3``.
    """
    points = ad.as_tensor(points)
    base = np.clip(np.floor(points.data), 0, n_g - 1).astype(np.int64)
    frac = points - base.astype(points.data.dtype)
    one_minus = 1.0 - frac
    choices = ad.stack([one_minus, frac], axis=1)  # (P, 2, 3)
    w = (choices[:, _CORNERS[:, 0], 0]
         * choices[:, _CORNERS[:, 1], 1]
         * choices[:, _CORNERS[:, 2], 2])
    index = _flat_index(base[:, None, :] + _CORNERS[None, :, :], n_g)
    return w, index


def gridding(points, n_g):
    """Scatter a normalised cloud onto grid vertices.

    Each point gives its 8 cell vertices their trilinear weights; every vertex
    stores the mean contribution over the points whose cell touches it (0 when
    none does). Differentiable w.r.t. the point coordinates.
    """
    points = ad.as_tensor(points)
    V = num_vertices(n_g)
    if points.shape[0] == 0:
        return ad.Tensor(np.zeros(V), dtype=points.data.dtype)
    if np.any(points.data < 0) or np.any(points.data > n_g):
        raise ContractError(f"gridding expects points in [0, {n_g}]^3")
    w, index = corner_weights(points, n_g)
    flat_index = index.reshape(-1)
    total = ad.scatter_add(w.reshape(-1), flat_index, V)
    counts = np.bincount(flat_index, minlength=V)
    return total / np.maximum(counts, 1).astype(total.data.dtype)


def cell_corner_index(n_g):
    """(n_g^3, 8) flat vertex indices for every cell in C order."""
    r = np.arange(n_g)
    cells = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3)
    return _flat_index(cells[:, None, :] + _CORNERS[None, :, :], n_g)


class ReverseResult(NamedTuple):
    points: ad.Tensor  # (K, 3) grid coordinates
    cells: np.ndarray  # (K,) flat cell index of each emitted point


def gridding_reverse(weights, n_g, min_weight=0.0):
    """Emit one point per cell at the weight-normalised mean of its 8 vertices.

    Cells whose total vertex weight is not above ``min_weight`` emit nothing.
    Differentiable w.r.t. the weights.
    """
    weights = ad.as_tensor(weights)
    flat = weights.reshape(-1)
    if flat.shape[0] != num_vertices(n_g):
        raise ContractError(f"expected {num_vertices(n_g)} vertex weights, got {flat.shape[0]}")
    corners = cell_corner_index(n_g)
    totals = flat.data[corners].sum(axis=1)
    cells = np.nonzero(totals > min_weight)[0]
    if cells.size == 0:
        return ReverseResult(ad.Tensor(np.zeros((0, 3)), dtype=flat.data.dtype), cells)
    idx = corners[cells]
    w = ad.gather(flat, idx)  # (K, 8)
    pos = vertex_positions(n_g)[idx].astype(flat.data.dtype)  # (K, 8, 3)
    num = (w.reshape(-1, 8, 1) * pos).sum(axis=1)
    den = w.sum(axis=1, keepdims=True)
    return ReverseResult(num / den, cells)


class SampledFeatures(NamedTuple):
    values: ad.Tensor  # (P, 3 + C): coordinates followed by interpolated features
    clamped: int


def sample_cell_features(points, features, n_g):
    """Trilinearly interpolate vertex features at each point.

    ``features`` has shape (C, n_g+1, n_g+1, n_g+1). Points outside the grid
    are clamped to its boundary and counted. The result concatenates the
    (clamped) grid coordinates with the C sampled channels.
    """
    points = ad.as_tensor(points)
    features = ad.as_tensor(features)
    C = features.shape[0]
    if features.shape[1:] != (n_g + 1,) * 3:
        raise ContractError(f"feature grid {features.shape} does not match n_g={n_g}")
    outside = np.any((points.data < 0) | (points.data > n_g), axis=1)
    clamped = ad.clip(points, 0.0, float(n_g))
    w, index = corner_weights(clamped, n_g)
    table = features.reshape(C, -1).transpose(1, 0)  # (V, C)
    gathered = ad.gather(table, index)  # (P, 8, C)
    values = (gathered * w.reshape(-1, 8, 1)).sum(axis=1)
    return SampledFeatures(ad.concat([clamped, values], axis=1), int(np.count_nonzero(outside)))


def gridding_loss(pred, gt):
    """Mean absolute difference of vertex weights over all ``(n_g+1)^3`` vertices."""
    if isinstance(pred, VoxelGrid) and isinstance(gt, VoxelGrid):
        if pred.n_g != gt.n_g:
            raise ContractError(f"grid resolutions differ: {pred.n_g} vs {gt.n_g}")
        if pred.bounds is not None and gt.bounds is not None and pred.bounds != gt.bounds:
            raise ContractError("grids have different bounds")
    p = pred.weights if isinstance(pred, VoxelGrid) else ad.as_tensor(pred)
    g = gt.weights if isinstance(gt, VoxelGrid) else ad.as_tensor(gt)
    if p.size != g.size:
        raise ContractError(f"grid sizes differ: {p.shape} vs {g.shape}")
    return ad.abs(p.reshape(-1) - g.reshape(-1)).mean()
