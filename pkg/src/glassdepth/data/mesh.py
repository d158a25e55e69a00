"""Triangle meshes: validation, procedural vessels and surface sampling."""

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from . import codecs

MIN_TRIANGLE_AREA = 1e-12


@dataclass
class Mesh:
    """Vertices in metres (object frame) and triangle index triples."""

    vertices: np.ndarray
    triangles: np.ndarray
    object_id: int = 0

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if self.triangles.size:
            if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
                raise ContractError("triangle index out of range")
            if np.any(triangle_areas(self.vertices, self.triangles) <= MIN_TRIANGLE_AREA):
                raise ContractError("mesh contains degenerate triangles")

    def transformed(self, pose):
        """Vertices in the frame given by ``pose`` (object -> target)."""
        return pose.apply(self.vertices)

    def save(self, path):
        codecs.write_obj(path, self.vertices, self.triangles)

    @classmethod
    def load(cls, path, object_id=0):
        v, f = codecs.read_obj(path)
        return cls(v, f, object_id)


def triangle_areas(vertices, triangles):
    a, b, c = (vertices[triangles[:, i]] for i in range(3))
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def lathe(profile, segments=24, object_id=0):
    """Closed surface of revolution about +z.

    ``profile`` is a list of (radius, height) pairs from bottom to top; both
    ends are capped with a centre vertex.
    """
    profile = np.asarray(profile, dtype=np.float64)
    rings = len(profile)
    theta = 2.0 * np.pi * np.arange(segments) / segments
    verts = []
    for r, z in profile:
        verts.append(np.stack([r * np.cos(theta), r * np.sin(theta), np.full(segments, z)], axis=1))
    verts = np.concatenate(verts)
    bottom = len(verts)
    top = bottom + 1
    verts = np.vstack([verts, [0.0, 0.0, profile[0, 1]], [0.0, 0.0, profile[-1, 1]]])
    tris = []
    for ring in range(rings - 1):
        for s in range(segments):
            a = ring * segments + s
            b = ring * segments + (s + 1) % segments
            c = a + segments
            d = b + segments
            tris += [(a, b, d), (a, d, c)]
    for s in range(segments):
        tris.append((bottom, (s + 1) % segments, s))
        last = (rings - 1) * segments
        tris.append((top, last + s, last + (s + 1) % segments))
    return Mesh(verts, np.array(tris), object_id)


def beaker(radius, height, segments=24, object_id=0):
    """Capped cylinder standing on z = 0."""
    return lathe([(radius, 0.0), (radius, height)], segments, object_id)


def flask(radius, height, neck_radius, neck_fraction=0.35, segments=24, object_id=0):
    """Truncated cone body with a cylindrical neck, standing on z = 0."""
    body = height * (1.0 - neck_fraction)
    return lathe([(radius, 0.0), (neck_radius, body), (neck_radius, height)], segments, object_id)


def sample_surface(mesh, count, rng):
    """Area-weighted uniform samples on the mesh surface (object frame)."""
    v, t = mesh.vertices, mesh.triangles
    areas = triangle_areas(v, t)
    tri = rng.choice(len(t), size=count, p=areas / areas.sum())
    r1 = np.sqrt(rng.uniform(size=count))
    r2 = rng.uniform(size=count)
    a, b, c = (v[t[tri, i]] for i in range(3))
    return (1 - r1)[:, None] * a + (r1 * (1 - r2))[:, None] * b + (r1 * r2)[:, None] * c


def aabb(points):
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    return points.min(axis=0), points.max(axis=0)


def aabb_overlap_volume(a, b):
    lo = np.maximum(a[0], b[0])
    hi = np.minimum(a[1], b[1])
    return float(np.prod(np.clip(hi - lo, 0.0, None)))
