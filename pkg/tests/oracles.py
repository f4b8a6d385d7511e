"""Independent reference computations used by the tests.

Nothing here calls into mapraster's vectorized kernels; everything is plain
loops or a different algorithm from the one under test.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


def seg_dist(q, a, b):
    """Point-segment distance by minimizing over a dense-free closed form."""
    ax, ay = a
    bx, by = b
    qx, qy = q
    ex, ey = bx - ax, by - ay
    ll = ex * ex + ey * ey
    if ll == 0:
        return math.dist(q, a), (ax, ay)
    t = max(0.0, min(1.0, ((qx - ax) * ex + (qy - ay) * ey) / ll))
    f = (ax + t * ex, ay + t * ey)
    return math.dist(q, f), f


def crossings_up(q, verts):
    """Even-odd parity from a ray cast in the +y direction."""
    qx, qy = q
    inside = False
    n = len(verts)
    for i in range(n):
        (ax, ay), (bx, by) = verts[i], verts[(i + 1) % n]
        if (ax > qx) != (bx > qx):
            y_cross = ay + (qx - ax) * (by - ay) / (bx - ax)
            if qy < y_cross:
                inside = not inside
    return inside


def pixel_centers_px(h, w):
    for r in range(h):
        for c in range(w):
            yield r, c, (c + 0.5, r + 0.5)


def soft_line_oracle(pts_px, h, w, tau):
    out = np.empty((h, w))
    segs = list(zip(pts_px[:-1], pts_px[1:]))
    for r, c, q in pixel_centers_px(h, w):
        d = min(seg_dist(q, a, b)[0] for a, b in segs)
        out[r, c] = math.exp(-d / tau)
    return out


def soft_polygon_oracle(pts_px, h, w, tau):
    out = np.empty((h, w))
    n = len(pts_px)
    segs = [(pts_px[i], pts_px[(i + 1) % n]) for i in range(n)]
    for r, c, q in pixel_centers_px(h, w):
        d = min(seg_dist(q, a, b)[0] for a, b in segs)
        sign = 1.0 if (d == 0 or crossings_up(q, pts_px)) else -1.0
        out[r, c] = 1.0 / (1.0 + math.exp(-sign * d / tau))
    return out


def segment_stack(pts_px, h, w, closed):
    """(nseg, h, w) distances and (nseg, h, w, 2) feet, vectorized per segment."""
    n = len(pts_px)
    nseg = n if closed else n - 1
    qx, qy = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)
    ds, feet = [], []
    for k in range(nseg):
        a, b = pts_px[k], pts_px[(k + 1) % n]
        e = b - a
        ll = e @ e
        t = np.clip(((qx - a[0]) * e[0] + (qy - a[1]) * e[1]) / ll, 0, 1) if ll > 0 else np.zeros_like(qx)
        fx, fy = a[0] + t * e[0], a[1] + t * e[1]
        ds.append(np.hypot(qx - fx, qy - fy))
        feet.append(np.stack([fx, fy], axis=-1))
    return np.array(ds), np.array(feet)


def tie_free_mask(pts_px, h, w, closed, margin=1e-2):
    """Pixels at least ``margin`` px from any nearest-segment switch and from
    the element itself (line) or its boundary (polygon)."""
    ds, feet = segment_stack(np.asarray(pts_px, float), h, w, closed)
    k = np.argmin(ds, axis=0)
    best = np.take_along_axis(ds, k[None], 0)[0]
    best_foot = np.take_along_axis(feet, k[None, ..., None], 0)[0]
    ok = best >= margin
    for j in range(len(ds)):
        near = ds[j] < best + margin
        different = np.hypot(*(feet[j] - best_foot).transpose(2, 0, 1)) > 1e-9
        ok &= ~(near & different & (j != k))
    return ok


def chamfer_brute(p, q):
    p = [tuple(x) for x in p]
    q = [tuple(x) for x in q]
    pq = sum(min(math.dist(a, b) for b in q) for a in p) / len(p)
    qp = sum(min(math.dist(a, b) for b in p) for a in q) / len(q)
    return 0.5 * (pq + qp)


def ap_by_hand(labels, n_gt):
    """Sum of recall steps times the best precision at or beyond that rank."""
    if n_gt == 0:
        return 0.0 if labels else 1.0
    precisions, recalls = [], []
    tp = 0
    for i, l in enumerate(labels, 1):
        tp += l
        precisions.append(tp / i)
        recalls.append(tp / n_gt)
    ap = 0.0
    prev_r = 0.0
    for i in range(len(labels)):
        if recalls[i] > prev_r:
            ap += (recalls[i] - prev_r) * max(precisions[i:])
            prev_r = recalls[i]
    return ap


def assignment_brute(costs):
    c = np.asarray(costs)
    m, n = c.shape
    best = math.inf
    if m <= n:
        for perm in itertools.permutations(range(n), m):
            best = min(best, sum(c[i, perm[i]] for i in range(m)))
    else:
        for perm in itertools.permutations(range(m), n):
            best = min(best, sum(c[perm[j], j] for j in range(n)))
    return best


def central_diff(f, x, h):
    """Gradient of scalar f at array x by central differences."""
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp = x.copy()
        xm = x.copy()
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (f(xp) - f(xm)) / (2 * h)
    return g


def random_line_px(rng, n, lo=4.0, hi=60.0):
    return rng.uniform(lo, hi, size=(n, 2))


def random_star_polygon_px(rng, n, center=(32.0, 32.0), r_lo=6.0, r_hi=26.0):
    ang = np.sort(rng.uniform(0, 2 * np.pi, n))
    # keep angles distinct enough for a non-degenerate polygon
    ang = ang + np.arange(n) * 1e-3
    r = rng.uniform(r_lo, r_hi, n)
    return np.stack([center[0] + r * np.cos(ang), center[1] + r * np.sin(ang)], axis=1)


def arc_walk(pts, n):
    """Samples found by stepping along the segments one at a time."""
    lengths = [math.dist(pts[i], pts[i + 1]) for i in range(len(pts) - 1)]
    total = sum(lengths)
    out = []
    for i in range(n):
        s = total * i / (n - 1)
        k = 0
        while k < len(lengths) - 1 and s > lengths[k]:
            s -= lengths[k]
            k += 1
        t = min(s / lengths[k], 1.0)
        out.append(pts[k] + t * (pts[k + 1] - pts[k]))
    out[-1] = pts[-1]
    return np.array(out)


def dice_oracle(p, g, eps=1.0):
    """Squared-sum dice loss written out element by element."""
    num = 2 * sum(a * b for a, b in zip(p.ravel(), g.ravel())) + eps
    den = sum(a * a for a in p.ravel()) + sum(b * b for b in g.ravel()) + eps
    return 1 - num / den


def focal_oracle(scores, target, alpha, gamma):
    total = 0.0
    for k, s in enumerate(scores):
        p = 1 / (1 + math.exp(-s))
        if k == target:
            total += -(alpha if alpha is not None else 1) * (1 - p) ** gamma * math.log(p)
        else:
            total += -((1 - alpha) if alpha is not None else 1) * p ** gamma * math.log(1 - p)
    return total
