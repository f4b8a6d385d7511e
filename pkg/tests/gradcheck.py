"""Finite-difference check of the soft rasterizer's backward pass."""
from __future__ import annotations

import numpy as np

from mapraster import rasterizer

from oracles import tie_free_mask

FD_STEP = 1e-3
TIE_MARGIN = 1e-2


def check_element(pts_px, closed, grid, taus, rng):
    """Max relative error of analytic vs central-difference gradients per tau.

    The upstream is random positive on pixels clear of tie loci and of the
    element (line) or its boundary (polygon), zero elsewhere.
    """
    pts_px = np.asarray(pts_px, dtype=float)
    h, w = grid.shape
    keep = tie_free_mask(pts_px, h, w, closed, TIE_MARGIN)
    upstream = rng.uniform(0.1, 1.0, (h, w)) * keep
    field = rasterizer.field_from_pixels(pts_px, grid, closed)
    analytic = {tau: rasterizer.soft_backward(field, tau, upstream) for tau in taus}

    fd = {tau: np.zeros_like(pts_px) for tau in taus}
    for idx in np.ndindex(pts_px.shape):
        vals = []
        for sgn in (1, -1):
            p = pts_px.copy()
            p[idx] += sgn * FD_STEP
            f = rasterizer.field_from_pixels(p, grid, closed)
            vals.append({tau: float(np.sum(upstream * rasterizer.soft_values(f, tau))) for tau in taus})
        for tau in taus:
            fd[tau][idx] = (vals[0][tau] - vals[1][tau]) / (2 * FD_STEP)

    errors = {}
    for tau in taus:
        scale = max(np.abs(fd[tau]).max(), 1e-12)
        errors[tau] = float(np.abs(analytic[tau] - fd[tau]).max() / scale)
    return errors
