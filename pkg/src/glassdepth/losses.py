"""Training losses for depth completion."""

import numpy as np

from . import autodiff as ad
from .errors import ContractError, UndefinedLossError

PRED_FLOOR = 1e-6


def _log_residual(pred, gt):
    """``log(max(pred, floor)) - log(gt)`` over the pixels where gt > 0."""
    pred = ad.as_tensor(pred)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ContractError(f"pred {pred.shape} and gt {gt.shape} differ")
    support = np.nonzero(gt.reshape(-1) > 0)[0]
    if support.size == 0:
        raise UndefinedLossError("ground truth has no valid pixels")
    p = ad.gather(pred.reshape(-1), support)
    log_gt = np.log(gt.reshape(-1)[support]).astype(p.data.dtype)
    return ad.log(ad.maximum(p, PRED_FLOOR)) - log_gt


def log_l1_pairwise(pred, gt, pair_budget="exact", rng=None):
    """Mean of ``|log(y_i/y_j) - log(y*_i/y*_j)|`` over ordered pixel pairs of G.

    G is the set of pixels with nonzero ground truth. ``pair_budget="exact"``
    averages over all ``|G|^2`` ordered pairs (including ``i == j``); an integer
    budget draws that many ordered pairs uniformly with replacement from ``rng``
    (seeded with 0 when omitted).

    The exact mode runs in O(|G| log |G|): with residuals ``e`` sorted
    ascending, ``sum_{i,j} |e_i - e_j| = sum_k 2 (2k - |G| + 1) e_(k)``.
    """
    e = _log_residual(pred, gt)
    n = e.shape[0]
    if isinstance(pair_budget, str):
        if pair_budget != "exact":
            raise ContractError(f"pair_budget must be 'exact' or an int, got {pair_budget!r}")
        order = np.argsort(e.data, kind="stable")
        coef = np.empty(n, dtype=e.data.dtype)
        coef[order] = 2.0 * (2.0 * np.arange(n) - n + 1.0)
        return (e * (coef / float(n) ** 2)).sum()
    budget = int(pair_budget)
    if budget < 1:
        raise ContractError("pair_budget must be >= 1")
    rng = np.random.default_rng(0) if rng is None else rng
    i = rng.integers(0, n, size=budget)
    j = rng.integers(0, n, size=budget)
    return ad.abs(ad.gather(e, i) - ad.gather(e, j)).mean()


def log_l1(pred, gt):
    """Mean ``|log pred - log gt|`` over pixels with nonzero ground truth."""
    return ad.abs(_log_residual(pred, gt)).mean()


def depth_completion_loss(pred, gt, pair_budget="exact", log_l1_weight=1.0, rng=None):
    """Pairwise log-L1 plus a weighted pointwise log-L1 term, averaged over the batch.

    ``pred`` is an (N, 1, H, W) tensor and ``gt`` an (N, H, W) array. The
    pairwise term is invariant to a global depth scale; the pointwise term
    anchors the absolute scale.
    """
    gt = np.asarray(gt)
    total = None
    for k in range(gt.shape[0]):
        p = pred[k, 0]
        term = log_l1_pairwise(p, gt[k], pair_budget, rng)
        if log_l1_weight:
            term = term + log_l1(p, gt[k]) * log_l1_weight
        total = term if total is None else total + term
    return total * (1.0 / gt.shape[0])
