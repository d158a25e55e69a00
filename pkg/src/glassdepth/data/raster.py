"""Z-buffer triangle rasterisation of posed meshes into depth and instance rasters."""

from dataclasses import dataclass

import numpy as np

NEAR = 1e-4
DEPTH_TIE = 1e-9


@dataclass
class RasterResult:
    depth: np.ndarray  # (H, W) float64, 0 where empty
    ids: np.ndarray  # (H, W) int64 object id, 0 where empty
    normals: np.ndarray  # (H, W, 3) camera-frame face normal of the visible surface


def _clip_near(tri, near):
    """Clip a camera-frame triangle against z = near; returns 0..2 triangles."""
    inside = tri[:, 2] > near
    if inside.all():
        return [tri]
    if not inside.any():
        return []
    poly = []
    for i in range(3):
        p, q = tri[i], tri[(i + 1) % 3]
        pin, qin = p[2] > near, q[2] > near
        if pin:
            poly.append(p)
        if pin != qin:
            s = (near - p[2]) / (q[2] - p[2])
            x = p + s * (q - p)
            # the interpolated point can land a hair behind the plane
            x[2] = max(x[2], near * (1.0 + 1e-12))
            poly.append(x)
    return [np.array([poly[0], poly[k], poly[k + 1]]) for k in range(1, len(poly) - 1)]


def _draw(tri, normal, object_id, intr, zbuf, ids, nbuf):
    z = tri[:, 2]
    u = intr.fx * tri[:, 0] / z + intr.cx
    v = intr.fy * tri[:, 1] / z + intr.cy
    u0 = max(int(np.ceil(u.min())), 0)
    u1 = min(int(np.floor(u.max())), intr.width - 1)
    v0 = max(int(np.ceil(v.min())), 0)
    v1 = min(int(np.floor(v.max())), intr.height - 1)
    if u0 > u1 or v0 > v1:
        return
    area = (u[1] - u[0]) * (v[2] - v[0]) - (u[2] - u[0]) * (v[1] - v[0])
    if area == 0.0:
        return
    pu, pv = np.meshgrid(np.arange(u0, u1 + 1, dtype=np.float64),
                         np.arange(v0, v1 + 1, dtype=np.float64))
    # screen-space barycentrics via edge functions
    l0 = ((u[1] - pu) * (v[2] - pv) - (u[2] - pu) * (v[1] - pv)) / area
    l1 = ((u[2] - pu) * (v[0] - pv) - (u[0] - pu) * (v[2] - pv)) / area
    l2 = 1.0 - l0 - l1
    cover = (l0 >= 0) & (l1 >= 0) & (l2 >= 0)
    if not cover.any():
        return
    inv_z = l0 / z[0] + l1 / z[1] + l2 / z[2]
    cover &= inv_z > 0
    depth = np.zeros_like(inv_z)
    depth[cover] = 1.0 / inv_z[cover]
    rows, cols = slice(v0, v1 + 1), slice(u0, u1 + 1)
    cur = zbuf[rows, cols]
    cur_id = ids[rows, cols]
    closer = depth < cur - DEPTH_TIE
    tie = (np.abs(depth - cur) <= DEPTH_TIE) & (object_id < cur_id)
    update = cover & (closer | tie)
    cur[update] = depth[update]
    cur_id[update] = object_id
    nbuf[rows, cols][update] = normal


def rasterize_full(meshes, poses, intr, object_ids=None):
    """Rasterise ``meshes`` placed by ``poses`` (object -> camera).

    Pixel centres sit at integer (u, v); each covered pixel gets the depth of
    the nearest surface along its ray and that surface's object id. Depth ties
    within 1e-9 go to the lower object id. Geometry behind the near plane is
    clipped away.
    """
    if object_ids is None:
        object_ids = [m.object_id for m in meshes]
    h, w = intr.height, intr.width
    zbuf = np.full((h, w), np.inf)
    ids = np.zeros((h, w), dtype=np.int64)
    nbuf = np.zeros((h, w, 3))
    for mesh, pose, oid in zip(meshes, poses, object_ids):
        verts = mesh.transformed(pose)
        for tri_index in mesh.triangles:
            tri = verts[tri_index]
            n = np.cross(tri[1] - tri[0], tri[2] - tri[0])
            n = n / np.linalg.norm(n)
            if np.dot(n, tri[0]) > 0:
                n = -n  # face the camera
            for piece in _clip_near(tri, NEAR):
                _draw(piece, n, int(oid), intr, zbuf, ids, nbuf)
    empty = ~np.isfinite(zbuf)
    zbuf[empty] = 0.0
    ids[empty] = 0
    return RasterResult(zbuf, ids, nbuf)


def rasterize(meshes, poses, intr, object_ids=None):
    """Depth map and instance-id raster (uint8, 0 = background)."""
    result = rasterize_full(meshes, poses, intr, object_ids)
    return result.depth, result.ids.astype(np.uint8)
