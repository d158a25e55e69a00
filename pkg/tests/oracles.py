"""Brute-force reference implementations used only by the tests.

Each oracle is written as directly as possible (explicit loops, no shared
code with the package) so that agreement is meaningful.
"""

import itertools
import math

import numpy as np


def conv_direct(x, w, stride, padding):
    """Direct N-d cross-correlation: x (N, C, *S), w (O, C, *K)."""
    rank = x.ndim - 2
    xp = np.pad(x, [(0, 0), (0, 0)] + [(padding, padding)] * rank)
    k = w.shape[2:]
    out_sizes = [(xp.shape[2 + a] - k[a]) // stride + 1 for a in range(rank)]
    out = np.zeros((x.shape[0], w.shape[0], *out_sizes))
    for n in range(x.shape[0]):
        for o in range(w.shape[0]):
            for pos in itertools.product(*[range(s) for s in out_sizes]):
                window = tuple(slice(p * stride, p * stride + k[a]) for a, p in enumerate(pos))
                out[(n, o) + pos] = np.sum(xp[(n, slice(None)) + window] * w[o])
    return out


def conv_transpose_direct(x, w, stride, padding=0):
    """Scatter form of the transposed convolution: w (C_in, C_out, *K)."""
    rank = x.ndim - 2
    k = w.shape[2:]
    full = [(x.shape[2 + a] - 1) * stride + k[a] for a in range(rank)]
    out = np.zeros((x.shape[0], w.shape[1], *full))
    for n in range(x.shape[0]):
        for c in range(x.shape[1]):
            for pos in itertools.product(*[range(s) for s in x.shape[2:]]):
                window = tuple(slice(p * stride, p * stride + k[a]) for a, p in enumerate(pos))
                out[(n, slice(None)) + window] += x[(n, c) + pos] * w[c]
    crop = tuple(slice(padding, s - padding) for s in full)
    return out[(slice(None), slice(None)) + crop]


def gridding_oracle(points, n_g):
    """Per-point loop over the 8 cell vertices, then per-vertex mean."""
    m = n_g + 1
    total = np.zeros((m, m, m))
    count = np.zeros((m, m, m))
    for p in np.asarray(points, dtype=np.float64):
        base = [min(int(math.floor(c)), n_g - 1) for c in p]
        for di, dj, dk in itertools.product((0, 1), repeat=3):
            v = (base[0] + di, base[1] + dj, base[2] + dk)
            w = 1.0
            for a in range(3):
                w *= 1.0 - abs(p[a] - v[a])
            total[v] += w
            count[v] += 1
    out = np.where(count > 0, total / np.maximum(count, 1), 0.0)
    return out.reshape(-1)


def trilinear_oracle(field, p):
    """Interpolate a (C, m, m, m) vertex field at one point."""
    n_g = field.shape[1] - 1
    base = [min(int(math.floor(c)), n_g - 1) for c in p]
    value = np.zeros(field.shape[0])
    for di, dj, dk in itertools.product((0, 1), repeat=3):
        v = (base[0] + di, base[1] + dj, base[2] + dk)
        w = np.prod([1.0 - abs(p[a] - v[a]) for a in range(3)])
        value += w * field[(slice(None),) + v]
    return value


def depth_metrics_oracle(pred, gt, mask, mode):
    """Per-pixel loop over the evaluated set (no resizing)."""
    d, t = [], []
    for pv, gv, mv in zip(np.ravel(pred), np.ravel(gt), np.ravel(mask)):
        if not mv or gv < 1e-6:
            continue
        if mode == "only-valid" and pv <= 0:
            continue
        d.append(float(pv))
        t.append(float(gv))
    if not d:
        return None
    n = len(d)
    rmse = math.sqrt(sum((a - b) ** 2 for a, b in zip(d, t)) / n)
    mae = sum(abs(a - b) for a, b in zip(d, t)) / n
    rel = sum(abs(a - b) / b for a, b in zip(d, t)) / n

    def ratio(a, b):
        return math.inf if a == 0 else max(a / b, b / a)

    deltas = [sum(ratio(a, b) < th for a, b in zip(d, t)) / n for th in (1.05, 1.10, 1.25)]
    return (rmse, mae, *deltas, rel)


def normal_metrics_oracle(pn, gn, mask):
    angles = []
    for idx in np.ndindex(mask.shape):
        if not mask[idx]:
            continue
        a, b = pn[idx], gn[idx]
        if not np.any(a) or not np.any(b):
            continue
        dot = max(-1.0, min(1.0, float(sum(a[i] * b[i] for i in range(3)))))
        angles.append(math.degrees(math.acos(dot)))
    if not angles:
        return None
    angles.sort()
    n = len(angles)
    median = angles[n // 2] if n % 2 else 0.5 * (angles[n // 2 - 1] + angles[n // 2])
    fractions = [sum(x <= th for x in angles) / n for th in (11.25, 22.5, 30.0)]
    return (sum(angles) / n, median, *fractions)


def add_oracle(points, R1, t1, R2, t2):
    total = 0.0
    for x in points:
        a = [sum(R1[i][j] * x[j] for j in range(3)) + t1[i] for i in range(3)]
        b = [sum(R2[i][j] * x[j] for j in range(3)) + t2[i] for i in range(3)]
        total += math.sqrt(sum((a[i] - b[i]) ** 2 for i in range(3)))
    return total / len(points)


def pairwise_log_l1_oracle(pred, gt):
    """Enumerate all |G|^2 ordered pairs."""
    idx = [i for i, g in enumerate(np.ravel(gt)) if g > 0]
    p = np.ravel(pred)
    g = np.ravel(gt)
    total = 0.0
    for i in idx:
        for j in idx:
            total += abs(math.log(max(p[i], 1e-6) / max(p[j], 1e-6)) - math.log(g[i] / g[j]))
    return total / len(idx) ** 2


def ray_cast_oracle(triangles, object_ids, intr):
    """Möller-Trumbore ray casting through every pixel centre.

    ``triangles`` are camera-frame (3, 3) vertex arrays. The nearest hit wins;
    hits within 1e-9 in depth go to the lower object id, then to the earlier
    triangle. Returns (depth, ids) with depth measured along the optical axis.
    """
    depth = np.zeros((intr.height, intr.width))
    ids = np.zeros((intr.height, intr.width), dtype=np.int64)
    for v in range(intr.height):
        for u in range(intr.width):
            d = np.array([(u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0])
            best = None
            for tri, oid in zip(triangles, object_ids):
                t = _moller_trumbore(d, tri)
                if t is None or t <= 1e-4:
                    continue
                if best is None or t < best[0] - 1e-9 or (abs(t - best[0]) <= 1e-9
                                                             and oid < best[1]):
                    best = (t, oid)
            if best is not None:
                depth[v, u], ids[v, u] = best
    return depth, ids


def _moller_trumbore(direction, tri):
    # the ray starts at the camera centre; the direction has z = 1, so t is depth
    a, b, c = (np.asarray(p, dtype=np.float64) for p in tri)
    e1, e2 = b - a, c - a
    h = np.cross(direction, e2)
    det = e1 @ h
    if abs(det) < 1e-15:
        return None
    inv = 1.0 / det
    s = -a
    bu = inv * (s @ h)
    q = np.cross(s, e1)
    bv = inv * (direction @ q)
    if bu < 0 or bv < 0 or bu + bv > 1:
        return None
    return inv * (e2 @ q)
