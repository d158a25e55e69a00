"""Depth, surface-normal and pose evaluation metrics."""

import math
from dataclasses import dataclass, fields

import numpy as np

from .errors import ContractError, DimensionError
from .geometry import resize_nearest

EVAL_SIZE = (144, 256)  # (height, width)
DELTAS = (1.05, 1.10, 1.25)
GT_FLOOR = 1e-6
DEPTH_COLUMNS = ("RMSE", "MAE", "delta_1.05", "delta_1.10", "delta_1.25", "REL")
NORMAL_COLUMNS = ("mean", "median", "within_11.25", "within_22.5", "within_30")
NORMAL_THRESHOLDS = (11.25, 22.5, 30.0)
ADD_THRESHOLD = 0.02


@dataclass
class MetricReport:
    rmse: float
    mae: float
    rel: float
    delta_105: float
    delta_110: float
    delta_125: float
    count: int
    mode: str

    @property
    def empty(self):
        return self.count == 0

    def row(self):
        """Values in table column order: RMSE, MAE, d1.05, d1.10, d1.25, REL."""
        return (self.rmse, self.mae, self.delta_105, self.delta_110, self.delta_125, self.rel)

    @classmethod
    def undefined(cls, mode):
        nan = float("nan")
        return cls(nan, nan, nan, nan, nan, nan, 0, mode)


@dataclass
class NormalReport:
    mean: float
    median: float
    within_11_25: float
    within_22_5: float
    within_30: float
    count: int

    @property
    def empty(self):
        return self.count == 0

    def row(self):
        return (self.mean, self.median, self.within_11_25, self.within_22_5, self.within_30)

    @classmethod
    def undefined(cls):
        nan = float("nan")
        return cls(nan, nan, nan, nan, nan, 0)


def _prepare(pred, gt, mask, eval_size):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    mask = np.ones(gt.shape, dtype=bool) if mask is None else np.asarray(mask) > 0
    if not (pred.shape == gt.shape == mask.shape):
        raise DimensionError(f"pred {pred.shape}, gt {gt.shape}, mask {mask.shape} differ")
    if eval_size is not None:
        h, w = eval_size
        pred, gt, mask = (resize_nearest(a, w, h) for a in (pred, gt, mask))
    return pred, gt, mask


def depth_metrics(pred, gt, mask=None, mode="only-valid", eval_size=EVAL_SIZE):
    """RMSE, MAE, REL and ratio-threshold accuracies over the masked valid pixels.

    All three rasters are nearest-resized to ``eval_size`` (height, width)
    first; ``None`` skips resizing. The evaluated set holds masked pixels with
    ground truth >= 1e-6; ``mode="only-valid"`` also drops pixels where the
    prediction is 0, while ``mode="all"`` keeps them as zero depth. Threshold
    accuracies use a strict ``max(d/d*, d*/d) < delta``.
    """
    if mode not in ("only-valid", "all"):
        raise ContractError(f"mode must be 'only-valid' or 'all', got {mode!r}")
    pred, gt, mask = _prepare(pred, gt, mask, eval_size)
    sel = mask & (gt >= GT_FLOOR)
    if mode == "only-valid":
        sel &= pred > 0
    d = pred[sel]
    t = gt[sel]
    if d.size == 0:
        return MetricReport.undefined(mode)
    err = d - t
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.maximum(d / t, np.where(d > 0, t / d, np.inf))
    return MetricReport(
        rmse=float(np.sqrt(np.mean(err ** 2))),
        mae=float(np.mean(np.abs(err))),
        rel=float(np.mean(np.abs(err) / t)),
        delta_105=float(np.mean(ratio < DELTAS[0])),
        delta_110=float(np.mean(ratio < DELTAS[1])),
        delta_125=float(np.mean(ratio < DELTAS[2])),
        count=int(d.size),
        mode=mode,
    )


def normal_metrics(pred_normals, gt_normals, mask=None, pred_valid=None, gt_valid=None):
    """Angular error statistics (degrees) over masked pixels valid in both maps.

    Threshold fractions are inclusive (``angle <= threshold``). Validity
    defaults to nonzero normal vectors.
    """
    pn = np.asarray(pred_normals, dtype=np.float64)
    gn = np.asarray(gt_normals, dtype=np.float64)
    if pn.shape != gn.shape or pn.shape[-1] != 3:
        raise DimensionError(f"normal maps {pn.shape} and {gn.shape} must match (..., 3)")
    sel = np.ones(pn.shape[:-1], dtype=bool) if mask is None else np.asarray(mask) > 0
    sel = sel & (np.any(pn != 0, axis=-1) if pred_valid is None else np.asarray(pred_valid))
    sel = sel & (np.any(gn != 0, axis=-1) if gt_valid is None else np.asarray(gt_valid))
    if not np.any(sel):
        return NormalReport.undefined()
    dots = np.clip(np.sum(pn[sel] * gn[sel], axis=-1), -1.0, 1.0)
    angles = np.degrees(np.arccos(dots))
    fractions = [float(np.mean(angles <= th)) for th in NORMAL_THRESHOLDS]
    return NormalReport(float(np.mean(angles)), float(np.median(angles)), *fractions,
                        count=int(angles.size))


def add_metric(model_points, gt_pose, est_pose):
    """Average distance between model points under the true and estimated poses."""
    pts = np.asarray(model_points, dtype=np.float64).reshape(-1, 3)
    if pts.shape[0] == 0:
        raise ContractError("ADD needs at least one model point")
    diff = gt_pose.apply(pts) - est_pose.apply(pts)
    return float(np.mean(np.linalg.norm(diff, axis=1)))


def add_2cm(adds, threshold=ADD_THRESHOLD):
    """Fraction of ADD values strictly below ``threshold`` (2 cm by default)."""
    adds = np.asarray(adds, dtype=np.float64)
    if adds.size == 0:
        raise ContractError("add_2cm needs at least one ADD value")
    return float(np.mean(adds < threshold))


def mean_report(reports):
    """Unweighted mean of defined reports (each record counts once)."""
    reports = [r for r in reports if not r.empty]
    if not reports:
        return None
    kind = type(reports[0])
    values = {}
    for f in fields(kind):
        if f.name == "count":
            values[f.name] = int(sum(r.count for r in reports))
        elif f.name == "mode":
            values[f.name] = reports[0].mode
        else:
            values[f.name] = float(np.mean([getattr(r, f.name) for r in reports]))
    return kind(**values)


def format_value(value):
    return "nan" if value is None or (isinstance(value, float) and math.isnan(value)) \
        else f"{value:.6f}"
