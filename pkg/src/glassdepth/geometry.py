"""Pinhole camera model, depth/point-cloud conversion, rigid poses and normals."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DimensionError


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels. Pixel ``(u, v)`` is column ``u``, row ``v``."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ContractError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ContractError(
                f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height} image")

    @classmethod
    def from_fov(cls, width, height, horizontal_fov_deg=87.0):
        """Square-pixel intrinsics with the principal point at the image centre."""
        f = (width / 2.0) / math.tan(math.radians(horizontal_fov_deg) / 2.0)
        return cls(f, f, width / 2.0, height / 2.0, int(width), int(height))

    def scaled(self, width, height):
        """Intrinsics for the same camera resampled to ``width`` x ``height``."""
        sx, sy = width / self.width, height / self.height
        return CameraIntrinsics(self.fx * sx, self.fy * sy, self.cx * sx, self.cy * sy,
                                int(width), int(height))

    @property
    def matrix(self):
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def to_dict(self):
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "w": self.width, "h": self.height}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["fx"]), float(d["fy"]), float(d["cx"]), float(d["cy"]),
                   int(d["w"]), int(d["h"]))


@dataclass
class PointCloud:
    """N x 3 points in the camera frame.

    ``pixels`` optionally holds the (u, v) source pixel of each point and
    ``features`` an N x C per-point feature array.
    """

    points: np.ndarray
    pixels: np.ndarray = None
    features: np.ndarray = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(self.points)):
            raise ContractError("point coordinates must be finite")
        if self.pixels is not None:
            self.pixels = np.asarray(self.pixels, dtype=np.int64).reshape(-1, 2)
        if self.features is not None:
            self.features = np.asarray(self.features)

    def __len__(self):
        return self.points.shape[0]

    @property
    def empty(self):
        return self.points.shape[0] == 0


@dataclass(frozen=True)
class PoseSE3:
    """Rigid transform ``p -> R p + t``."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise ContractError("pose must be finite")
        if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-6 or abs(np.linalg.det(R) - 1.0) > 1e-6:
            raise ContractError("rotation is not orthonormal with det +1")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def from_matrix(cls, T):
        T = np.asarray(T, dtype=np.float64)
        return cls(T[:3, :3], T[:3, 3])

    @property
    def matrix(self):
        T = np.eye(4)
        T[:3, :3] = self.rotation
        T[:3, 3] = self.translation
        return T

    def inverse(self):
        Rt = self.rotation.T
        return PoseSE3(Rt, -Rt @ self.translation)

    def apply(self, points):
        points = np.asarray(points, dtype=np.float64)
        return points @ self.rotation.T + self.translation

    def __matmul__(self, other):
        return compose(self, other)

    def to_dict(self):
        return {"R": [float(v) for v in self.rotation.reshape(-1)],
                "t": [float(v) for v in self.translation]}

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["R"], dtype=np.float64).reshape(3, 3),
                   np.array(d["t"], dtype=np.float64))


def rotation_about_axis(axis, angle):
    """Rodrigues rotation matrix for ``angle`` radians about ``axis``."""
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    K = np.array([[0.0, -axis[2], axis[1]], [axis[2], 0.0, -axis[0]], [-axis[1], axis[0], 0.0]])
    return np.eye(3) + math.sin(angle) * K + (1.0 - math.cos(angle)) * (K @ K)


def compose(a, b):
    """Pose of applying ``b`` first, then ``a``."""
    return PoseSE3(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def transform(cloud, pose):
    """Apply a rigid pose to every point, keeping pixel indices and features."""
    return PointCloud(pose.apply(cloud.points), cloud.pixels, cloud.features)


def _check_raster(depth, intr):
    depth = np.asarray(depth)
    if depth.shape != (intr.height, intr.width):
        raise DimensionError(
            f"depth map {depth.shape} does not match intrinsics {intr.height}x{intr.width}")
    return depth


def deproject(depth, intr, mask=None):
    """Back-project every pixel with positive depth (and inside ``mask``) to 3D.

    Points are emitted in row-major pixel order.
    """
    depth = _check_raster(depth, intr).astype(np.float64)
    valid = depth > 0
    if mask is not None:
        mask = np.asarray(mask)
        if mask.shape != depth.shape:
            raise DimensionError(f"mask {mask.shape} does not match depth {depth.shape}")
        valid &= mask.astype(bool)
    v, u = np.nonzero(valid)
    d = depth[v, u]
    x = (u - intr.cx) * d / intr.fx
    y = (v - intr.cy) * d / intr.fy
    return PointCloud(np.stack([x, y, d], axis=1), pixels=np.stack([u, v], axis=1))


def _round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


@dataclass
class Projection:
    depth: np.ndarray
    dropped: int
    # points that fell outside the image (separate from the behind-camera tally)
    out_of_frame: int


def project(cloud, intr, return_stats=False):
    """Z-buffer projection of a cloud into a depth map (0 where nothing lands).

    Pixel targets are ``round(fx*x/z + cx), round(fy*y/z + cy)`` rounding half
    away from zero. The nearest point wins; on exact depth ties the first
    point written is kept. Points with ``z <= 0`` are skipped and counted in
    ``dropped``.
    """
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    pts = pts.reshape(-1, 3)
    depth = np.zeros((intr.height, intr.width), dtype=np.float64)
    in_front = pts[:, 2] > 0
    dropped = int(np.count_nonzero(~in_front))
    pts = pts[in_front]
    z = pts[:, 2]
    u = _round_half_away(intr.fx * pts[:, 0] / z + intr.cx).astype(np.int64)
    v = _round_half_away(intr.fy * pts[:, 1] / z + intr.cy).astype(np.int64)
    inside = (u >= 0) & (u < intr.width) & (v >= 0) & (v < intr.height)
    out_of_frame = int(np.count_nonzero(~inside))
    u, v, z = u[inside], v[inside], z[inside]
    if z.size:
        flat = v * intr.width + u
        # stable sort on (pixel, depth) keeps the first-written point on ties
        order = np.lexsort((np.arange(z.size), z, flat))
        flat_sorted = flat[order]
        first = np.ones(flat_sorted.size, dtype=bool)
        first[1:] = flat_sorted[1:] != flat_sorted[:-1]
        winners = order[first]
        depth.reshape(-1)[flat[winners]] = z[winners]
    if return_stats:
        return Projection(depth, dropped, out_of_frame)
    return depth


def normals_from_depth(depth):
    """Surface normals ``normalize(-dz/du, -dz/dv, 1)`` from a depth raster.

    Derivatives are in metres per pixel: central differences where both
    neighbours are valid, one-sided where only one is, and the pixel is marked
    invalid if it (or both neighbours along an axis) has no depth.

    Returns ``(normals, valid)`` with normals of shape (H, W, 3).
    """
    z = np.asarray(depth, dtype=np.float64)
    ok = z > 0
    grads = []
    axis_ok = []
    for axis in (1, 0):
        g = np.zeros_like(z)
        fwd = np.zeros_like(ok)
        bwd = np.zeros_like(ok)
        zf = np.zeros_like(z)
        zb = np.zeros_like(z)
        src = [slice(None)] * 2
        dst = [slice(None)] * 2
        src[axis], dst[axis] = slice(1, None), slice(None, -1)
        zf[tuple(dst)] = z[tuple(src)]
        fwd[tuple(dst)] = ok[tuple(src)]
        zb[tuple(src)] = z[tuple(dst)]
        bwd[tuple(src)] = ok[tuple(dst)]
        fwd &= ok
        bwd &= ok
        both = fwd & bwd
        g[both] = (zf[both] - zb[both]) / 2.0
        only_f = fwd & ~bwd
        g[only_f] = zf[only_f] - z[only_f]
        only_b = bwd & ~fwd
        g[only_b] = z[only_b] - zb[only_b]
        grads.append(g)
        axis_ok.append(fwd | bwd)
    dzdx, dzdy = grads
    valid = ok & axis_ok[0] & axis_ok[1]
    n = np.stack([-dzdx, -dzdy, np.ones_like(z)], axis=-1)
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    n[~valid] = 0.0
    return n, valid


def resize_nearest(raster, new_w, new_h):
    """Nearest-neighbour resampling; source index is ``floor(dst * src / dst_size)``.

    Works on (H, W) and (H, W, C) rasters.
    """
    raster = np.asarray(raster)
    if new_w < 1 or new_h < 1:
        raise ContractError(f"target size must be >= 1, got {new_w}x{new_h}")
    h, w = raster.shape[:2]
    rows = (np.arange(new_h) * h) // new_h
    cols = (np.arange(new_w) * w) // new_w
    return raster[rows[:, None], cols[None, :]]
