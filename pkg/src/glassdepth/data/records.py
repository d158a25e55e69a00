"""Dataset records and the JSON-lines scene manifest."""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError, FormatError
from ..geometry import CameraIntrinsics, PoseSE3
from . import codecs
from .mesh import Mesh

MANIFEST = "manifest.jsonl"


@dataclass
class DatasetRecord:
    """One capture. ``rgb`` and ``raw_depth`` may be None for annotation-only records."""

    record_id: str
    intrinsics: CameraIntrinsics
    gt_depth: np.ndarray
    mask: np.ndarray
    poses: dict  # object id -> PoseSE3 (object -> camera)
    rgb: np.ndarray = None
    raw_depth: np.ndarray = None
    meshes: dict = field(default_factory=dict)  # object id -> Mesh
    split: str = "train"

    def __post_init__(self):
        shape = (self.intrinsics.height, self.intrinsics.width)
        rasters = {"gt_depth": self.gt_depth, "mask": self.mask, "raw_depth": self.raw_depth}
        for name, raster in rasters.items():
            if raster is not None and np.shape(raster) != shape:
                raise ContractError(f"{name} has shape {np.shape(raster)}, expected {shape}")
        if self.rgb is not None and np.shape(self.rgb) != shape + (3,):
            raise ContractError(f"rgb has shape {np.shape(self.rgb)}, expected {shape + (3,)}")
        missing = sorted(set(int(i) for i in np.unique(self.mask)) - {0} - set(self.poses))
        if missing:
            raise ContractError(f"mask ids {missing} have no pose")

    @property
    def num_objects(self):
        return len(self.poses)

    @property
    def object_ids(self):
        return sorted(self.poses)


def record_paths(record_id):
    return {
        "rgb_path": f"rgb/{record_id}.ppm",
        "raw_path": f"raw/{record_id}.pfm",
        "gt_path": f"gt/{record_id}.pfm",
        "mask_path": f"mask/{record_id}.pgm",
    }


def mesh_path(record_id, object_id):
    return f"meshes/{record_id}_{object_id}.obj"


def to_entry(record):
    """Manifest entry (a dict in canonical field order) for ``record``."""
    entry = {"id": record.record_id}
    entry.update(record_paths(record.record_id))
    entry["intrinsics"] = record.intrinsics.to_dict()
    entry["objects"] = [{"id": int(k), "mesh_path": mesh_path(record.record_id, k),
                         "pose": record.poses[k].to_dict()} for k in record.object_ids]
    entry["split"] = record.split
    return entry


def write_record(root, record):
    """Write a record's rasters and meshes under ``root``; returns its manifest entry."""
    entry = to_entry(record)
    for sub in ("rgb", "raw", "gt", "mask", "meshes"):
        os.makedirs(os.path.join(root, sub), exist_ok=True)
    codecs.write_rgb(os.path.join(root, entry["rgb_path"]), record.rgb)
    codecs.write_depth(os.path.join(root, entry["raw_path"]), record.raw_depth)
    codecs.write_depth(os.path.join(root, entry["gt_path"]), record.gt_depth)
    codecs.write_mask(os.path.join(root, entry["mask_path"]), record.mask)
    for obj in entry["objects"]:
        record.meshes[obj["id"]].save(os.path.join(root, obj["mesh_path"]))
    return entry


def encode_entry(entry):
    return json.dumps(entry, separators=(", ", ": "))


def write_manifest(path, entries):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for entry in entries:
            fh.write(encode_entry(entry) + "\n")


_FIELDS = ("id", "rgb_path", "raw_path", "gt_path", "mask_path", "intrinsics", "objects", "split")


def read_manifest(path):
    """Parse a manifest; FormatError carries the 1-based line number as ``offset``."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().split("\n")
    except FileNotFoundError:
        raise FileNotFoundError(f"missing file: {path}") from None
    entries = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc.msg}", offset=number, path=path) from None
        missing = [k for k in _FIELDS if k not in entry]
        if missing:
            raise FormatError(f"manifest entry lacks {missing}", offset=number, path=path)
        entries.append(entry)
    return entries


def read_record(root, entry, load_meshes=True):
    intr = CameraIntrinsics.from_dict(entry["intrinsics"])
    poses = {int(o["id"]): PoseSE3.from_dict(o["pose"]) for o in entry["objects"]}
    meshes = {}
    if load_meshes:
        meshes = {int(o["id"]): Mesh.load(os.path.join(root, o["mesh_path"]), int(o["id"]))
                  for o in entry["objects"]}
    return DatasetRecord(
        record_id=entry["id"],
        intrinsics=intr,
        gt_depth=codecs.read_depth(os.path.join(root, entry["gt_path"])),
        mask=codecs.read_mask(os.path.join(root, entry["mask_path"])),
        poses=poses,
        rgb=codecs.read_rgb(os.path.join(root, entry["rgb_path"])),
        raw_depth=codecs.read_depth(os.path.join(root, entry["raw_path"])),
        meshes=meshes,
        split=entry["split"],
    )


def load_dataset(root, split=None, load_meshes=True):
    """All records of ``root``'s manifest, optionally restricted to one split."""
    entries = read_manifest(os.path.join(root, MANIFEST))
    return [read_record(root, e, load_meshes) for e in entries
            if split is None or e["split"] == split]


def save_dataset(root, records):
    os.makedirs(root, exist_ok=True)
    entries = [write_record(root, r) for r in records]
    write_manifest(os.path.join(root, MANIFEST), entries)
    return entries
