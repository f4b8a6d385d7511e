"""Pure numpy implementation of the per-pixel kernels.

Used when the compiled extension is unavailable; same signatures and
semantics as ``mapraster._kernels``.
"""
from __future__ import annotations

import numpy as np

BOUNDARY_EPS = 1e-12


def distance_field(pts, height, width, closed):
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    n = len(pts)
    nxt = np.arange(1, n + 1) % n
    nseg = n if closed else n - 1
    qx = np.broadcast_to(np.arange(width, dtype=np.float64) + 0.5, (height, width))
    qy = np.broadcast_to((np.arange(height, dtype=np.float64) + 0.5)[:, None], (height, width))

    best = np.full((height, width), np.inf)
    seg = np.zeros((height, width), dtype=np.int32)
    tt = np.zeros((height, width))
    for k in range(nseg):
        ax, ay = pts[k]
        ex = pts[nxt[k], 0] - ax
        ey = pts[nxt[k], 1] - ay
        ll = ex * ex + ey * ey
        inv = 1.0 / ll if ll > 0.0 else 0.0
        t = np.clip(((qx - ax) * ex + (qy - ay) * ey) * inv, 0.0, 1.0)
        fx = qx - (ax + t * ex)
        fy = qy - (ay + t * ey)
        d2 = fx * fx + fy * fy
        better = d2 < best
        best = np.where(better, d2, best)
        seg[better] = k
        tt = np.where(better, t, tt)
    dist = np.sqrt(best)

    sign = np.ones((height, width), dtype=np.int8)
    if closed:
        inside = np.zeros((height, width), dtype=bool)
        for k in range(n):
            ax, ay = pts[k]
            bx, by = pts[nxt[k]]
            straddle = (ay > qy) != (by > qy)
            if not straddle.any():
                continue
            with np.errstate(divide="ignore", invalid="ignore"):
                x_cross = ax + (qy - ay) * (bx - ax) / (by - ay)
            inside ^= straddle & (qx < x_cross)
        sign[~inside & (dist > BOUNDARY_EPS)] = -1
    return dist, seg, tt, sign


def backward_points(pts, seg, tt, dist, weight, closed):
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    n = len(pts)
    height, width = dist.shape
    active = (weight != 0.0) & (dist > 0.0)
    r, c = np.nonzero(active)
    k = seg[r, c].astype(np.intp)
    k1 = (k + 1) % n
    t = tt[r, c]
    w = weight[r, c] / dist[r, c]
    a = pts[k]
    b = pts[k1]
    ux = (a[:, 0] + t * (b[:, 0] - a[:, 0]) - (c + 0.5)) * w
    uy = (a[:, 1] + t * (b[:, 1] - a[:, 1]) - (r + 0.5)) * w

    # bincount sums in input (row-major) order, so the result is deterministic
    idx = np.concatenate([k, k1])
    gx = np.bincount(idx, weights=np.concatenate([(1.0 - t) * ux, t * ux]), minlength=n)
    gy = np.bincount(idx, weights=np.concatenate([(1.0 - t) * uy, t * uy]), minlength=n)
    return np.stack([gx, gy], axis=1)
