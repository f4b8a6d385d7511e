"""Training objectives on soft masks and point sets, and Hungarian matching.

Losses return ``(value, gradient)`` where a gradient is needed downstream.
Point gradients from :func:`total_loss` are per meter of world coordinate.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import rasterizer
from .elements import MapElement, sample_points
from .geometry import GridSpec, Polyline

DICE_EPS = 1.0
MIN_SEGMENT = 1e-9
# cost placed on pred/gt pairs of different geometry kinds
KIND_MISMATCH_COST = 1e6


@dataclass(frozen=True)
class LossWeights:
    """Weights (render, classification, direction, regression).

    In the matching cost the third weight scales the regression term and the
    fourth is unused; in the training loss the third weights direction and
    the fourth regression.
    """

    render: float = 2.0
    cls: float = 2.0
    third: float = 0.005
    reg: float = 0.05

    def __post_init__(self) -> None:
        vals = (self.render, self.cls, self.third, self.reg)
        if any(not math.isfinite(v) or v < 0 for v in vals):
            raise ValueError("loss weights must be finite and >= 0")
        if not any(v > 0 for v in vals):
            raise ValueError("at least one loss weight must be > 0")

    @classmethod
    def matching(cls, render=2.0, cls_=2.0, reg=0.05) -> LossWeights:
        return cls(render, cls_, reg, 0.0)

    def as_list(self) -> list[float]:
        return [self.render, self.cls, self.third, self.reg]


def _values(mask) -> np.ndarray:
    if isinstance(mask, rasterizer.SoftMask):
        return mask.values
    if isinstance(mask, rasterizer.BinaryMask):
        return mask.bits.astype(np.float64)
    return np.asarray(mask, dtype=np.float64)


def dice_loss(pred, target, *, denominator: str = "squared", eps: float = DICE_EPS):
    """Smoothed dice loss and its gradient with respect to ``pred``.

    ``denominator="squared"`` divides by sum(p^2) + sum(g^2) + eps, which is
    zero exactly when pred equals target, soft masks included.
    ``"linear"`` divides by sum(p) + sum(g) + eps; on binary masks both agree.
    """
    for a, b in ((pred, target), (target, pred)):
        if hasattr(a, "grid") and hasattr(b, "grid") and a.grid != b.grid:
            raise ValueError("dice_loss: masks are on different grids")
    p, g = _values(pred), _values(target)
    if p.shape != g.shape:
        raise ValueError(f"dice_loss: shape mismatch {p.shape} vs {g.shape}")
    num = 2.0 * float(np.sum(p * g)) + eps
    if denominator == "squared":
        den = float(np.sum(p * p) + np.sum(g * g)) + eps
        grad = -2.0 * (g * den - num * p) / (den * den)
    elif denominator == "linear":
        den = float(np.sum(p) + np.sum(g)) + eps
        grad = -(2.0 * g * den - num) / (den * den)
    else:
        raise ValueError(f"unknown dice denominator {denominator!r}")
    return 1.0 - num / den, grad


def _as_array(line) -> np.ndarray:
    return line.points if isinstance(line, Polyline) else np.asarray(line, dtype=np.float64)


def direction_regularization(line, *, form: str = "one_minus_cos"):
    """Penalty on direction changes between consecutive segments.

    ``form="one_minus_cos"`` sums 1 - cos(theta) over interior joints (zero for
    a straight line); ``form="cos"`` sums the raw cosines. Joints touching a
    segment shorter than 1e-9 contribute nothing. Returns (value, (N, 2) grad).
    """
    pts = _as_array(line)
    n = len(pts)
    grad = np.zeros_like(pts, dtype=np.float64)
    if n < 3:
        return 0.0, grad
    if form not in ("one_minus_cos", "cos"):
        raise ValueError(f"unknown direction regularization form {form!r}")
    sgn = -1.0 if form == "one_minus_cos" else 1.0
    seg = np.diff(pts, axis=0)
    length = np.hypot(seg[:, 0], seg[:, 1])
    total = 0.0
    for i in range(n - 2):
        lu, lv = length[i], length[i + 1]
        if lu < MIN_SEGMENT or lv < MIN_SEGMENT:
            continue
        u, v = seg[i], seg[i + 1]
        cos = float(u @ v) / (lu * lv)
        total += 1.0 - cos if sgn < 0 else cos
        d_du = v / (lu * lv) - cos * u / (lu * lu)
        d_dv = u / (lu * lv) - cos * v / (lv * lv)
        grad[i] -= sgn * d_du
        grad[i + 1] += sgn * (d_du - d_dv)
        grad[i + 2] += sgn * d_dv
    return total, grad


def _l1(pred: np.ndarray, target: np.ndarray, reduction: str):
    diff = pred - target
    scale = 1.0 / len(pred) if reduction == "mean" else 1.0
    return float(np.sum(np.abs(diff))) * scale, np.sign(diff) * scale


def l1_regression_loss(pred, target, *, reduction: str = "mean", return_grad: bool = False):
    """Per-point L1 distance, minimized over the target's two orientations."""
    p, t = _as_array(pred), _as_array(target)
    if p.shape != t.shape:
        raise ValueError(f"l1_regression_loss: point counts differ ({len(p)} vs {len(t)})")
    if reduction not in ("mean", "sum"):
        raise ValueError(f"unknown reduction {reduction!r}")
    fwd = _l1(p, t, reduction)
    rev = _l1(p, t[::-1], reduction)
    best = rev if rev[0] < fwd[0] else fwd
    return best if return_grad else best[0]


def _log_sigmoid(x: np.ndarray) -> np.ndarray:
    return -np.logaddexp(0.0, -x)


def focal_classification_loss(scores, target_class: int | None, alpha: float | None = 0.25,
                              gamma: float = 2.0, *, return_grad: bool = False):
    """Sigmoid focal loss summed over classes with a one-hot target.

    ``target_class=None`` is the background (all-negative) target.
    ``alpha=None`` disables the class-balancing weight; with ``gamma=0`` the
    loss is then exactly the summed binary cross-entropy.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.zeros_like(s)
    if target_class is not None:
        if not 0 <= target_class < len(s):
            raise IndexError(f"target class {target_class} outside 0..{len(s) - 1}")
        y[target_class] = 1.0
    if alpha is not None and not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    if gamma < 0:
        raise ValueError("gamma must be >= 0")

    p = 1.0 / (1.0 + np.exp(-s))
    log_p, log_q = _log_sigmoid(s), _log_sigmoid(-s)
    w_pos = 1.0 if alpha is None else alpha
    w_neg = 1.0 if alpha is None else 1.0 - alpha
    q = 1.0 - p
    pos = -w_pos * q ** gamma * log_p
    neg = -w_neg * p ** gamma * log_q
    loss = float(np.sum(np.where(y > 0, pos, neg)))
    if not return_grad:
        return loss
    d_pos = w_pos * (gamma * p * q ** gamma * log_p - q ** (gamma + 1))
    d_neg = w_neg * (p ** (gamma + 1) - gamma * q * p ** gamma * log_q)
    return loss, np.where(y > 0, d_pos, d_neg)


def _sigmoid(x: float) -> float:
    return 0.5 * (1.0 + math.tanh(0.5 * x))


def _render_pair(pred: MapElement, gt: MapElement, grid: GridSpec, tau: float):
    return (rasterizer.render_soft(pred.geometry, grid, tau),
            rasterizer.render_soft(gt.geometry, grid, tau))


def matching_cost(pred: MapElement, scores, gt: MapElement, weights: LossWeights,
                  grid: GridSpec, tau: float = rasterizer.DEFAULT_TAU, *,
                  dice_denominator: str = "squared", reduction: str = "mean",
                  mismatch_cost: float = KIND_MISMATCH_COST) -> float:
    """render * dice + cls * (1 - sigmoid(score of gt class)) + reg * L1.

    Uses ``weights.render``, ``weights.cls`` and ``weights.third``. A
    line/polygon mismatch returns ``mismatch_cost``.
    """
    if pred.kind != gt.kind:
        return mismatch_cost
    pm, gm = _render_pair(pred, gt, grid, tau)
    dice, _ = dice_loss(pm, gm, denominator=dice_denominator)
    cls = 1.0 - _sigmoid(float(np.asarray(scores)[gt.class_id]))
    reg = l1_regression_loss(pred.points, sample_points(gt.geometry, len(pred.points)),
                             reduction=reduction)
    return weights.render * dice + weights.cls * cls + weights.third * reg


def cost_matrix(preds: Sequence[tuple[MapElement, np.ndarray]], gts: Sequence[MapElement],
                weights: LossWeights, grid: GridSpec, tau: float = rasterizer.DEFAULT_TAU,
                **kw) -> np.ndarray:
    out = np.empty((len(preds), len(gts)))
    for i, (el, sc) in enumerate(preds):
        for j, gt in enumerate(gts):
            out[i, j] = matching_cost(el, sc, gt, weights, grid, tau, **kw)
    return out


def _lsa_total(costs: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    if costs.size == 0:
        return 0.0, np.empty(0, int), np.empty(0, int)
    r, c = linear_sum_assignment(costs)
    return float(costs[r, c].sum()), r, c


def hungarian_assign(costs) -> list[tuple[int, int]]:
    """Minimum-cost one-to-one assignment of size min(M, N).

    Among optimal assignments the lexicographically smallest one is returned,
    reading each prediction's ground-truth index in row order (an unassigned
    row sorts after every column).
    """
    c = np.asarray(costs, dtype=np.float64)
    if c.ndim != 2:
        raise ValueError("cost matrix must be 2-D")
    if not np.all(np.isfinite(c)):
        raise ValueError("cost matrix contains non-finite entries")
    m, n = c.shape
    if m == 0 or n == 0:
        return []
    best, r, cols = _lsa_total(c)
    tol = 1e-9 * max(1.0, abs(best))
    current = dict(zip(r.tolist(), cols.tolist()))

    fixed: dict[int, int | None] = {}
    fixed_cost = 0.0
    used: set[int] = set()
    for i in range(m):
        rows_after = list(range(i + 1, m))
        reference = current.get(i)
        candidates = [j for j in range(n) if j not in used]
        if m > n:
            candidates.append(None)
        for j in candidates:
            if j == reference:
                break
            free = [k for k in range(n) if k not in used and k != j]
            needed = min(m, n) - len(used) - (j is not None)
            if min(len(rows_after), len(free)) != needed:
                continue
            sub = c[np.ix_(rows_after, free)]
            total, sr, sc = _lsa_total(sub)
            total += fixed_cost + (c[i, j] if j is not None else 0.0)
            if total <= best + tol:
                current = {rows_after[a]: free[b] for a, b in zip(sr, sc)}
                reference = j
                break
        fixed[i] = reference
        if reference is not None:
            used.add(reference)
            fixed_cost += c[i, reference]
    return [(i, j) for i, j in fixed.items() if j is not None]


def brute_force_assign(costs) -> float:
    """Exhaustive minimum over all assignments of size min(M, N)."""
    c = np.asarray(costs, dtype=np.float64)
    m, n = c.shape
    if m <= n:
        return min(sum(c[i, p[i]] for i in range(m)) for p in itertools.permutations(range(n), m))
    return min(sum(c[p[j], j] for j in range(n)) for p in itertools.permutations(range(m), n))


@dataclass
class LossResult:
    value: float
    point_grads: list[np.ndarray]
    score_grads: list[np.ndarray]
    terms: dict[str, float] = field(default_factory=dict)


def total_loss(preds: Sequence[tuple[MapElement, np.ndarray]], gts: Sequence[MapElement],
               assignment: Sequence[tuple[int, int]], weights: LossWeights, grid: GridSpec,
               tau: float = rasterizer.DEFAULT_TAU, *, alpha: float | None = 0.25,
               gamma: float = 2.0, dice_denominator: str = "squared",
               direction_form: str = "one_minus_cos", reduction: str = "mean") -> LossResult:
    """Training loss over a scene given a prediction-to-GT assignment.

    Matched pairs contribute render * dice + cls * focal + third * direction +
    reg * L1; unmatched predictions contribute cls * focal against the
    background. Point gradients are per meter; score gradients per logit.
    """
    seen_p, seen_g = set(), set()
    for i, j in assignment:
        if not (0 <= i < len(preds) and 0 <= j < len(gts)) or i in seen_p or j in seen_g:
            raise ValueError(f"invalid assignment pair ({i}, {j})")
        seen_p.add(i)
        seen_g.add(j)
    pairs = dict(assignment)

    total = 0.0
    terms = {"render": 0.0, "cls": 0.0, "dir": 0.0, "reg": 0.0}
    point_grads, score_grads = [], []
    for i, (el, scores) in enumerate(preds):
        g_pts = np.zeros_like(el.points, dtype=np.float64)
        gt = gts[pairs[i]] if i in pairs else None
        cls, g_sc = focal_classification_loss(scores, gt.class_id if gt is not None else None,
                                              alpha, gamma, return_grad=True)
        terms["cls"] += weights.cls * cls
        g_sc = weights.cls * g_sc
        if gt is not None:
            if gt.kind != el.kind:
                raise ValueError(f"assignment pairs a {el.kind} with a {gt.kind}")
            field_ = rasterizer.distance_field(el.geometry, grid)
            pm = rasterizer.soft_values(field_, tau)
            gm = rasterizer.render_soft(gt.geometry, grid, tau).values
            dice, d_mask = dice_loss(pm, gm, denominator=dice_denominator)
            terms["render"] += weights.render * dice
            if weights.render:
                g_px = rasterizer.soft_backward(field_, tau, weights.render * d_mask)
                g_pts += rasterizer.gradient_to_world(g_px, grid)

            if el.kind == "line" and weights.third:
                d, g_dir = direction_regularization(el.points, form=direction_form)
                terms["dir"] += weights.third * d
                g_pts += weights.third * g_dir

            target = sample_points(gt.geometry, len(el.points))
            reg, g_reg = l1_regression_loss(el.points, target, reduction=reduction, return_grad=True)
            terms["reg"] += weights.reg * reg
            g_pts += weights.reg * g_reg
        point_grads.append(g_pts)
        score_grads.append(g_sc)
    total = sum(terms.values())
    return LossResult(total, point_grads, score_grads, terms)
