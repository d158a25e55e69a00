"""Ground-truth annotation from fiducial tag poses and registered object meshes."""

import json
from dataclasses import dataclass

import numpy as np

from ..errors import AnnotationError, FormatError
from ..geometry import CameraIntrinsics, PoseSE3, compose
from .raster import DEPTH_TIE, rasterize
from .records import DatasetRecord


@dataclass(frozen=True)
class TagObservation:
    """A detected tag: its camera-frame pose and the registered tag -> object offset."""

    tag_id: int
    T_cam_tag: PoseSE3
    T_tag_obj: PoseSE3
    object_id: int

    @property
    def object_pose(self):
        return compose(self.T_cam_tag, self.T_tag_obj)

    def to_dict(self):
        return {"tag_id": int(self.tag_id), "object_id": int(self.object_id),
                "T_cam_tag": self.T_cam_tag.to_dict(), "T_tag_obj": self.T_tag_obj.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["tag_id"]), PoseSE3.from_dict(d["T_cam_tag"]),
                   PoseSE3.from_dict(d["T_tag_obj"]), int(d["object_id"]))


def composite(depth, mask, background):
    """Put ``background`` depth wherever it is nearer than (or replaces missing) objects."""
    background = np.asarray(background, dtype=np.float64)
    front = (background > 0) & ((depth == 0) | (background < depth - DEPTH_TIE))
    return np.where(front, background, depth), np.where(front, 0, mask).astype(np.uint8)


def object_poses(tags):
    """Object id -> camera-frame pose; with several tags per object the lowest tag id wins."""
    poses = {}
    for tag in sorted(tags, key=lambda t: t.tag_id):
        poses.setdefault(int(tag.object_id), tag.object_pose)
    return poses


def annotate_scene(tags, meshes, intr, background=None, record_id="annotated", rgb=None,
                   raw_depth=None, split="train"):
    """Render GT depth and instance mask for the objects the tags locate.

    ``meshes`` maps object id -> Mesh in its object frame. ``background`` is an
    optional depth map of the static scene, merged by nearest surface.
    """
    poses = object_poses(tags)
    missing = sorted(k for k in poses if k not in meshes)
    if missing:
        raise AnnotationError(f"no mesh for object id {missing[0]}")
    ids = sorted(poses)
    depth, mask = rasterize([meshes[k] for k in ids], [poses[k] for k in ids], intr, ids)
    if background is not None:
        depth, mask = composite(depth, mask, background)
    return DatasetRecord(record_id, intr, depth, mask, poses, rgb=rgb, raw_depth=raw_depth,
                         meshes={k: meshes[k] for k in ids}, split=split)


def encode_tags(intr, tags, background_path=None):
    doc = {"intrinsics": intr.to_dict(), "tags": [t.to_dict() for t in tags]}
    if background_path is not None:
        doc["background_path"] = background_path
    return json.dumps(doc, indent=1)


def read_tags(path):
    """Parse a tags file: returns (intrinsics, tags, background_path or None)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise FileNotFoundError(f"missing file: {path}") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", offset=exc.pos, path=path) from None
    try:
        intr = CameraIntrinsics.from_dict(doc["intrinsics"])
        tags = [TagObservation.from_dict(t) for t in doc["tags"]]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"tags file lacks field {exc}", path=path) from None
    return intr, tags, doc.get("background_path")
