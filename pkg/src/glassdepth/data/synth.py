"""Procedural tabletop scenes of glass vessels and a transparent-depth sensor model."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError, GenerationError
from ..geometry import CameraIntrinsics, PoseSE3, compose, deproject, rotation_about_axis
from .annotate import TagObservation, composite
from .mesh import Mesh, aabb, aabb_overlap_volume, beaker, flask
from .raster import rasterize, rasterize_full
from .records import DatasetRecord

MAX_OBJECTS = 3
MAX_ATTEMPTS = 100
TABLE_HALF = 3.0
TAG_HALF = 0.015
LIGHT = np.array([-0.3, -0.6, 1.0]) / np.linalg.norm([-0.3, -0.6, 1.0])
TINTS = np.array([[170, 220, 235], [200, 235, 190], [235, 205, 170]], dtype=np.float64)


@dataclass(frozen=True)
class DistortionConfig:
    p_hole: float = 0.3
    p_bleed: float = 0.5
    sigma: float = 0.005
    speckle: float = 0.01
    seed: int = 0

    def __post_init__(self):
        for name in ("p_hole", "p_bleed", "speckle"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ContractError(f"{name} must lie in [0, 1]")
        if self.sigma < 0:
            raise ContractError("sigma must be >= 0")


def synth_distort(gt, background, mask, cfg=DistortionConfig(), rng=None):
    """Corrupt ``gt`` the way a depth sensor fails on glass.

    Inside the mask a pixel is dropped with ``p_hole``, otherwise reports the
    background behind the object with ``p_bleed``, otherwise the true depth;
    outside the mask it keeps the true depth apart from speckle dropouts. All
    surviving values get N(0, sigma) noise.
    """
    gt = np.asarray(gt, dtype=np.float64)
    background = np.asarray(background, dtype=np.float64)
    if not (gt.shape == background.shape == np.shape(mask)):
        raise ContractError("gt, background and mask must share a resolution")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    # draw every stream regardless of the config so streams stay aligned
    u_hole = rng.uniform(size=gt.shape)
    u_bleed = rng.uniform(size=gt.shape)
    u_speckle = rng.uniform(size=gt.shape)
    noise = rng.standard_normal(gt.shape) * cfg.sigma
    inside = np.asarray(mask) > 0
    hole = inside & (u_hole < cfg.p_hole)
    bleed = inside & ~hole & (u_bleed < cfg.p_bleed)
    speckle = ~inside & (u_speckle < cfg.speckle)
    base = np.where(bleed, background, gt)
    raw = np.where(base > 0, base + noise, 0.0)
    raw[hole | speckle] = 0.0
    return np.maximum(raw, 0.0)


def look_at(eye, target, up=(0.0, 0.0, 1.0)):
    """Camera -> world pose for a camera at ``eye`` looking at ``target`` (x right, y down)."""
    eye = np.asarray(eye, dtype=np.float64)
    f = np.asarray(target, dtype=np.float64) - eye
    f /= np.linalg.norm(f)
    r = np.cross(f, up)
    r /= np.linalg.norm(r)
    d = np.cross(f, r)
    return PoseSE3(np.stack([r, d, f], axis=1), eye)


def table_mesh():
    h = TABLE_HALF
    return Mesh([[-h, -h, 0], [h, -h, 0], [h, h, 0], [-h, h, 0]], [[0, 1, 2], [0, 2, 3]], 0)


@dataclass
class SyntheticScene:
    intrinsics: CameraIntrinsics
    meshes: list  # object frame, ids 1..n
    poses: list  # object -> camera
    kinds: list
    tags: list
    T_cam_world: PoseSE3
    background: np.ndarray
    gt_depth: np.ndarray
    mask: np.ndarray
    rgb: np.ndarray
    raw_depth: np.ndarray = None
    tag_world: list = field(default_factory=list)

    def record(self, record_id, split="train"):
        return DatasetRecord(record_id, self.intrinsics, self.gt_depth, self.mask,
                             {m.object_id: p for m, p in zip(self.meshes, self.poses)},
                             rgb=self.rgb, raw_depth=self.raw_depth,
                             meshes={m.object_id: m for m in self.meshes}, split=split)


def _random_vessel(rng, object_id):
    radius = rng.uniform(0.025, 0.045)
    height = rng.uniform(0.07, 0.13)
    if rng.uniform() < 0.5:
        return "beaker", beaker(radius, height, object_id=object_id)
    neck = radius * rng.uniform(0.35, 0.6)
    return "flask", flask(radius, height, neck, rng.uniform(0.25, 0.4), object_id=object_id)


def _place(rng, meshes):
    """World poses with pairwise disjoint world AABBs, by rejection sampling."""
    poses, boxes = [], []
    for mesh in meshes:
        for _ in range(MAX_ATTEMPTS):
            xy = rng.uniform(-0.09, 0.09, size=2)
            yaw = rng.uniform(0.0, 2.0 * np.pi)
            pose = PoseSE3(rotation_about_axis([0, 0, 1], yaw), [xy[0], xy[1], 0.0])
            box = aabb(pose.apply(mesh.vertices))
            if all(aabb_overlap_volume(box, other) == 0.0 for other in boxes):
                poses.append(pose)
                boxes.append(box)
                break
        else:
            raise GenerationError(f"could not place object {mesh.object_id} "
                                  f"after {MAX_ATTEMPTS} attempts")
    return poses


def _shade(scene_depth, mask, normals, intr, T_world_cam, tag_world, n_objects):
    h, w = scene_depth.shape
    # table: 5 cm checkerboard plus dark tag squares, in world coordinates
    cloud = deproject(scene_depth, intr)
    world = T_world_cam.apply(cloud.points)
    u, v = cloud.pixels[:, 0], cloud.pixels[:, 1]
    checker = (np.floor(world[:, 0] / 0.05) + np.floor(world[:, 1] / 0.05)) % 2
    table = np.zeros((h, w))
    table[v, u] = np.where(checker > 0, 165.0, 125.0)
    for pose in tag_world:
        local = pose.inverse().apply(world)
        inside = np.all(np.abs(local[:, :2]) <= TAG_HALF, axis=1)
        table[v[inside], u[inside]] = 25.0
    rgb = np.repeat(table[..., None], 3, axis=2) * np.array([1.0, 0.97, 0.92])
    lit = 0.45 + 0.55 * np.abs(normals @ LIGHT)
    for k in range(1, n_objects + 1):
        sel = mask == k
        tint = TINTS[(k - 1) % len(TINTS)]
        rgb[sel] = 0.5 * rgb[sel] + 0.5 * tint * lit[sel][:, None]
    return np.clip(np.round(rgb), 0, 255).astype(np.uint8)


def generate_scene(seed, n_objects=MAX_OBJECTS, intrinsics=None, distortion=None):
    """A seeded tabletop scene of ``n_objects`` (1..3) glass vessels.

    The camera looks down at the objects from a random azimuth; every object
    gets one tag lying on the table beside it. Returns GT depth, background
    (table only) depth, mask, RGB and, with a ``distortion`` config, the raw
    sensor depth.
    """
    if not 1 <= n_objects <= MAX_OBJECTS:
        raise ContractError(f"object count must be in 1..{MAX_OBJECTS}, got {n_objects}")
    intr = intrinsics or CameraIntrinsics.from_fov(640, 480)
    rng = np.random.default_rng(seed)
    kinds, meshes = zip(*[_random_vessel(rng, k + 1) for k in range(n_objects)])
    world_poses = _place(rng, meshes)

    azimuth = rng.uniform(0.0, 2.0 * np.pi)
    elevation = np.radians(rng.uniform(45.0, 65.0))
    dist = rng.uniform(0.3, 0.36)
    target = np.array([0.0, 0.0, 0.04])
    eye = target + dist * np.array([np.cos(elevation) * np.cos(azimuth),
                                    np.cos(elevation) * np.sin(azimuth), np.sin(elevation)])
    T_world_cam = look_at(eye, target)
    T_cam_world = T_world_cam.inverse()
    poses = [compose(T_cam_world, p) for p in world_poses]

    tags, tag_world = [], []
    for k, (mesh, pose) in enumerate(zip(meshes, world_poses)):
        radius = np.max(np.linalg.norm(mesh.vertices[:, :2], axis=1))
        angle = rng.uniform(0.0, 2.0 * np.pi)
        offset = (radius + 0.03) * np.array([np.cos(angle), np.sin(angle), 0.0])
        T_world_tag = PoseSE3(rotation_about_axis([0, 0, 1], rng.uniform(0, 2 * np.pi)),
                              pose.translation + offset)
        tag_world.append(T_world_tag)
        T_tag_obj = compose(T_world_tag.inverse(), pose)
        tags.append(TagObservation(k, compose(T_cam_world, T_world_tag), T_tag_obj,
                                   mesh.object_id))

    background, _ = rasterize([table_mesh()], [T_cam_world], intr, [0])
    obj = rasterize_full(list(meshes), poses, intr)
    gt, mask = composite(obj.depth, obj.ids, background)
    rgb = _shade(gt, mask, obj.normals, intr, T_world_cam, tag_world, n_objects)
    raw = None
    if distortion is not None:
        raw = synth_distort(gt, background, mask, distortion,
                            rng=np.random.default_rng([seed, distortion.seed]))
    return SyntheticScene(intr, list(meshes), poses, list(kinds), tags, T_cam_world,
                          background, gt, mask, rgb, raw, tag_world)
