"""Finite-difference cases for every differentiable op the networks use.

Each builder takes (seed, dtype) and returns ``(function, inputs)`` where
``function(*inputs)`` is a scalar tensor. Outputs are contracted with a fixed
random tensor so every gradient coordinate is generically nonzero, and
inputs are kept away from the kinks of piecewise-defined ops (cell
boundaries, ties) so central differences are meaningful.
"""

import numpy as np

from glassdepth import autodiff as ad
from glassdepth.gridding import gridding, gridding_loss, gridding_reverse, num_vertices, \
    sample_cell_features
from glassdepth.losses import depth_completion_loss, log_l1, log_l1_pairwise
from glassdepth.nn.spade import SpadeParams, spade_normalize

TOLERANCE = {np.float64: 1e-5, np.float32: 1e-3}


def leaf(values, dtype):
    return ad.Tensor(np.asarray(values, dtype=np.float64), requires_grad=True, dtype=dtype)


def off_grid(rng, n, n_g, margin=0.02):
    """Points in (0, n_g)^3 at least ``margin`` away from every integer plane."""
    pts = rng.uniform(0.0, n_g, size=(n, 3))
    frac = pts - np.floor(pts)
    bad = (frac < margin) | (frac > 1 - margin)
    pts[bad] += 2 * margin * np.where(frac[bad] < 0.5, 1, -1)
    return np.clip(pts, margin, n_g - margin)


def conv2d(seed, dtype):
    r = np.random.default_rng(seed)
    x, w = leaf(r.normal(size=(2, 2, 5, 5)), dtype), leaf(r.normal(size=(3, 2, 3, 3)), dtype)
    weights = r.normal(size=(2, 3, 3, 3))
    return (lambda x, w: (ad.conv(x, w, 2, 1) * weights).sum()), [x, w]


def conv3d(seed, dtype):
    r = np.random.default_rng(seed)
    x, w = leaf(r.normal(size=(1, 2, 4, 4, 4)), dtype), leaf(r.normal(size=(2, 2, 3, 3, 3)), dtype)
    weights = r.normal(size=(1, 2, 2, 2, 2))
    return (lambda x, w: (ad.conv(x, w, 2, 1) * weights).sum()), [x, w]


def conv_transpose2d(seed, dtype):
    r = np.random.default_rng(seed)
    x, w = leaf(r.normal(size=(1, 2, 3, 3)), dtype), leaf(r.normal(size=(2, 2, 3, 3)), dtype)
    weights = r.normal(size=(1, 2, 5, 5))
    return (lambda x, w: (ad.conv_transpose(x, w, 2, 1) * weights).sum()), [x, w]


def conv_transpose3d(seed, dtype):
    r = np.random.default_rng(seed)
    x, w = leaf(r.normal(size=(1, 2, 2, 2, 2)), dtype), leaf(r.normal(size=(2, 1, 3, 3, 3)), dtype)
    weights = r.normal(size=(1, 1, 3, 3, 3))
    return (lambda x, w: (ad.conv_transpose(x, w, 2, 1) * weights).sum()), [x, w]


def _bind(module, names, tensors):
    """Point a module's parameters at the given tensors (by dotted name)."""
    for name, t in zip(names, tensors):
        *path, attr = name.split(".")
        owner = module
        for part in path:
            owner = owner[int(part)] if part.isdigit() else getattr(owner, part)
        setattr(owner, attr, t)


def spade(seed, dtype):
    r = np.random.default_rng(seed)
    params = SpadeParams(3, r, hidden=4)
    names = list(params.parameters())
    # shift the hidden pre-activations away from the leaky-relu kink
    params.shared.bias.data = params.shared.bias.data + 0.5
    h = leaf(r.normal(size=(2, 3, 4, 4)) * 2.0 + 1.0, dtype)
    mask = (r.uniform(size=(2, 4, 4)) < 0.5).astype(np.float64)
    inputs = [h] + [leaf(p.data, dtype) for p in params.parameters().values()]
    weights = r.normal(size=(2, 3, 4, 4))

    def f(h, *ps):
        _bind(params, names, ps)
        return (spade_normalize(h, mask, params) * weights).sum()

    return f, inputs


def gridding_points(seed, dtype):
    r = np.random.default_rng(seed)
    n_g = 4
    pts = leaf(off_grid(r, 12, n_g), dtype)
    weights = r.normal(size=num_vertices(n_g))
    return (lambda p: (gridding(p, n_g) * weights).sum()), [pts]


def gridding_reverse_weights(seed, dtype):
    r = np.random.default_rng(seed)
    n_g = 3
    w = leaf(r.uniform(0.1, 1.0, size=num_vertices(n_g)), dtype)
    weights = r.normal(size=(n_g ** 3, 3))
    return (lambda w: (gridding_reverse(w, n_g).points * weights).sum()), [w]


def feature_sampling(seed, dtype):
    r = np.random.default_rng(seed)
    n_g = 3
    pts = leaf(off_grid(r, 6, n_g), dtype)
    feats = leaf(r.normal(size=(2, n_g + 1, n_g + 1, n_g + 1)), dtype)
    weights = r.normal(size=(6, 5))
    return (lambda p, f: (sample_cell_features(p, f, n_g).values * weights).sum()), [pts, feats]


def grid_loss(seed, dtype):
    r = np.random.default_rng(seed)
    n = num_vertices(3)
    gt = r.uniform(0, 1, size=n)
    # keep |pred - gt| well away from zero
    pred = gt + r.choice([-1.0, 1.0], size=n) * r.uniform(0.05, 0.5, size=n)
    return (lambda p: gridding_loss(p, gt)), [leaf(pred, dtype)]


def _separated_depths(r, n):
    """Depths whose log ratios to a GT map are pairwise separated."""
    gt = r.uniform(0.5, 2.0, size=n)
    offsets = np.linspace(-0.4, 0.4, n)
    r.shuffle(offsets)
    return np.exp(offsets) * gt, gt


def pairwise_loss(seed, dtype):
    r = np.random.default_rng(seed)
    pred, gt = _separated_depths(r, 12)
    pred, gt = pred.reshape(3, 4), gt.reshape(3, 4)
    gt[0, 0] = 0.0  # an invalid pixel outside G
    return (lambda p: log_l1_pairwise(p, gt)), [leaf(pred, dtype)]


def pairwise_loss_sampled(seed, dtype):
    r = np.random.default_rng(seed)
    pred, gt = _separated_depths(r, 12)

    def f(p):
        return log_l1_pairwise(p, gt, pair_budget=50, rng=np.random.default_rng(seed))
    return f, [leaf(pred, dtype)]


def completion_loss(seed, dtype):
    r = np.random.default_rng(seed)
    pred, gt = _separated_depths(r, 16)
    # pointwise residuals must also stay away from zero
    pred = pred * np.where(np.abs(np.log(pred / gt)) < 0.02, 1.05, 1.0)
    pred, gt = pred.reshape(1, 1, 4, 4), gt.reshape(1, 4, 4)
    return (lambda p: depth_completion_loss(p, gt, log_l1_weight=0.5)), [leaf(pred, dtype)]


def pointwise_loss(seed, dtype):
    r = np.random.default_rng(seed)
    gt = r.uniform(0.5, 2.0, size=10)
    pred = gt * np.exp(r.choice([-1.0, 1.0], size=10) * r.uniform(0.05, 0.3, size=10))
    return (lambda p: log_l1(p, gt)), [leaf(pred, dtype)]


CASES = {
    "conv2d": conv2d,
    "conv3d": conv3d,
    "conv_transpose2d": conv_transpose2d,
    "conv_transpose3d": conv_transpose3d,
    "spade": spade,
    "gridding": gridding_points,
    "gridding_reverse": gridding_reverse_weights,
    "feature_sampling": feature_sampling,
    "gridding_loss": grid_loss,
    "log_l1_pairwise": pairwise_loss,
    "log_l1_pairwise_sampled": pairwise_loss_sampled,
    "log_l1": pointwise_loss,
    "depth_completion_loss": completion_loss,
}


def check(name, seed, dtype):
    """Max relative error of one case; 32-bit graphs use float64 differences."""
    fn, inputs = CASES[name](seed, dtype)
    ref = np.float64 if dtype == np.float32 else None
    return ad.grad_check(fn, inputs, eps=1e-4, reference_dtype=ref)
