"""End-to-end inference (per-object completion then depth completion) and evaluation."""

import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, EmptyCloudError
from .geometry import deproject, normals_from_depth, project
from .metrics import (
    DEPTH_COLUMNS, EVAL_SIZE, NORMAL_COLUMNS, depth_metrics, format_value, mean_report,
    normal_metrics,
)
from .nn import config as train_config
from .nn.dc import DcNetwork, dc_forward
from .nn.pcc import PccNetwork, pcc_forward

log = logging.getLogger(__name__)

VARIANTS = ("pcc-only", "dc-only", "joint")
CHECKPOINT_NAMES = {"pcc": "pcc.ckpt", "joint": "dc.ckpt", "dc-only": "dc-only.ckpt"}
GROUPS = ("1", "2", "3", "combined")


def sidecar_path(checkpoint_path):
    root, _ = os.path.splitext(checkpoint_path)
    return root + ".cfg"


@dataclass
class PipelineConfig:
    variant: str = "joint"
    checkpoint_dir: str = None
    eval_size: tuple = EVAL_SIZE
    mode: str = "only-valid"
    seed: int = None  # PCC resampling seed; None uses each network's configured seed

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ContractError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.mode not in ("only-valid", "all"):
            raise ContractError(f"mode must be 'only-valid' or 'all', got {self.mode!r}")

    def required_checkpoints(self):
        names = {"pcc-only": ["pcc"], "dc-only": ["dc-only"], "joint": ["pcc", "joint"]}
        return [os.path.join(self.checkpoint_dir or ".", CHECKPOINT_NAMES[n])
                for n in names[self.variant]]

    def check(self):
        """Raise FileNotFoundError naming the first missing checkpoint or sidecar."""
        for path in self.required_checkpoints():
            for p in (path, sidecar_path(path)):
                if not os.path.isfile(p):
                    raise FileNotFoundError(f"missing file: {p}")


def load_network(path):
    """Rebuild a network from its checkpoint and ``.cfg`` sidecar."""
    cfg = train_config.load(sidecar_path(path))
    dtype = np.float64 if cfg.precision == "float64" else np.float32
    if cfg.stage == "pcc":
        net = PccNetwork(cfg.pcc_config())
    else:
        net = DcNetwork(cfg.dc_config())
    net.astype(dtype)
    if not os.path.isfile(path):
        raise FileNotFoundError(f"missing file: {path}")
    net.load(path)
    return net


@dataclass
class Networks:
    pcc: PccNetwork = None
    dc: DcNetwork = None

    @classmethod
    def load(cls, cfg):
        cfg.check()
        nets = cls()
        for path in cfg.required_checkpoints():
            net = load_network(path)
            if isinstance(net, PccNetwork):
                nets.pcc = net
            else:
                nets.dc = net
        return nets


@dataclass
class InferenceResult:
    depth: np.ndarray  # final prediction
    pcc_depth: np.ndarray  # projected completions, nonzero only inside instance masks
    dc_input: np.ndarray  # depth fed to the depth-completion network
    dc_mask: np.ndarray  # union of instance masks
    skipped: list = field(default_factory=list)  # instance ids whose raw cloud was empty


def merge_pcc(raw_depth, mask, intr, pcc_net, seed=None):
    """Replace each instance's raw depth by the projection of its completed cloud.

    Returns (merged depth, PCC-projected depth, skipped instance ids). Pixels of
    an instance that receive no projected point become 0; pixels outside every
    mask keep the raw depth.
    """
    raw_depth = np.asarray(raw_depth, dtype=np.float64)
    mask = np.asarray(mask)
    merged = raw_depth.copy()
    pcc_depth = np.zeros_like(raw_depth)
    skipped = []
    for k in (int(i) for i in np.unique(mask) if i != 0):
        inst = mask == k
        cloud = deproject(raw_depth, intr, inst)
        try:
            rng = None if seed is None else np.random.default_rng([seed, k])
            completed = pcc_forward(cloud, pcc_net, rng=rng)
        except EmptyCloudError as exc:
            log.warning("instance %d: point cloud completion skipped (%s)", k, exc)
            merged[inst] = 0.0
            skipped.append(k)
            continue
        proj = project(completed, intr)
        pcc_depth[inst] = proj[inst]
        merged[inst] = proj[inst]
    return merged, pcc_depth, skipped


def infer(record, cfg, nets, mask=None):
    """Run the selected variant on one record (its GT depth is not used).

    ``mask`` overrides the record's instance mask (e.g. an externally
    predicted segmentation).
    """
    mask = record.mask if mask is None else np.asarray(mask)
    if mask.shape != record.raw_depth.shape:
        raise ContractError(f"mask {mask.shape} does not match depth {record.raw_depth.shape}")
    raw = np.asarray(record.raw_depth, dtype=np.float64)
    union = (mask > 0).astype(np.uint8)
    pcc_depth = np.zeros_like(raw)
    skipped = []
    if cfg.variant == "dc-only":
        dc_input = raw
    else:
        dc_input, pcc_depth, skipped = merge_pcc(raw, mask, record.intrinsics, nets.pcc,
                                                 cfg.seed)
    if cfg.variant == "pcc-only":
        depth = dc_input
    else:
        depth = dc_forward(record.rgb, dc_input, union, nets.dc)
    return InferenceResult(depth, pcc_depth, dc_input, union, skipped)


@dataclass
class RecordResult:
    record_id: str
    num_objects: int
    depth: object = None  # MetricReport
    normals: object = None  # NormalReport
    error: str = None


def evaluate_record(record, pred, mode="only-valid", eval_size=EVAL_SIZE):
    """Depth metrics (after the evaluation resize) and normal metrics on the object mask."""
    mask = record.mask > 0
    report = depth_metrics(pred, record.gt_depth, mask, mode, eval_size)
    # normals are taken at native resolution so the stencil sees true neighbours
    pn, pv = normals_from_depth(pred)
    gn, gv = normals_from_depth(record.gt_depth)
    normals = normal_metrics(pn, gn, mask, pv, gv)
    return report, normals


def evaluate(records, predict, cfg):
    """Evaluate ``predict(record) -> depth`` over records.

    A record whose prediction or metrics raise is kept as an error row; the
    aggregation continues. Returns (per-record results, group -> (depth, normal)
    mean reports) with groups "1", "2", "3" (object count) and "combined".
    """
    if not records:
        raise ContractError("cannot evaluate an empty split")
    results = []
    for record in records:
        res = RecordResult(record.record_id, record.num_objects)
        try:
            pred = predict(record)
            res.depth, res.normals = evaluate_record(record, pred, cfg.mode, cfg.eval_size)
        except Exception as exc:  # noqa: BLE001 - row-level error reporting
            res.error = f"{type(exc).__name__}: {exc}"
            log.error("record %s failed: %s", record.record_id, res.error)
        results.append(res)
    groups = {}
    for g in GROUPS:
        members = [r for r in results if r.error is None
                   and (g == "combined" or str(r.num_objects) == g)]
        groups[g] = (mean_report([r.depth for r in members]),
                     mean_report([r.normals for r in members]), len(members))
    return results, groups


def depth_table(results, groups):
    """CSV text: group rows then per-record rows, columns in table order."""
    lines = [",".join(("group", "records") + DEPTH_COLUMNS + ("error",))]
    for g in GROUPS:
        report, _, n = groups[g]
        values = report.row() if report is not None else (None,) * len(DEPTH_COLUMNS)
        lines.append(",".join([g, str(n)] + [format_value(v) for v in values] + [""]))
    for r in results:
        values = r.depth.row() if r.depth is not None else (None,) * len(DEPTH_COLUMNS)
        lines.append(",".join([f"record:{r.record_id}", "1"] + [format_value(v) for v in values]
                              + [_csv_text(r.error or "")]))
    return "\n".join(lines) + "\n"


def normal_table(results, groups):
    lines = [",".join(("group", "records") + NORMAL_COLUMNS + ("error",))]
    for g in GROUPS:
        _, report, n = groups[g]
        values = report.row() if report is not None else (None,) * len(NORMAL_COLUMNS)
        lines.append(",".join([g, str(n)] + [format_value(v) for v in values] + [""]))
    for r in results:
        values = r.normals.row() if r.normals is not None else (None,) * len(NORMAL_COLUMNS)
        lines.append(",".join([f"record:{r.record_id}", "1"] + [format_value(v) for v in values]
                              + [_csv_text(r.error or "")]))
    return "\n".join(lines) + "\n"


def _csv_text(text):
    text = text.replace("\n", " ")
    return '"' + text.replace('"', '""') + '"' if ("," in text or '"' in text) else text
