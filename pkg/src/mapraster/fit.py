"""Fit an element's control points to a target mask through the soft rasterizer.

The optimization runs in pixel coordinates so that ``step`` is in pixels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rasterizer
from .elements import LINE, MapElement
from .losses import dice_loss, direction_regularization


class FitError(RuntimeError):
    def __init__(self, message: str, trace: FitTrace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class FitConfig:
    iterations: int = 1000
    step: float = 0.1
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    tau: float = rasterizer.DEFAULT_TAU
    dice_weight: float = 1.0
    direction_weight: float = 0.0
    tolerance: float = 1e-6
    patience: int = 20
    # keep a copy of the points every N iterations (0 = never)
    snapshot_every: int = 0
    dice_denominator: str = "squared"
    # step multiplier applied whenever the loss goes up (1.0 disables)
    decay_on_increase: float = 0.5

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.step > 0:
            raise ValueError("step must be > 0")
        if self.optimizer not in ("adam", "gd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        rasterizer.check_tau(self.tau)
        if self.dice_weight < 0 or self.direction_weight < 0:
            raise ValueError("loss weights must be >= 0")
        if not 0.0 < self.decay_on_increase <= 1.0:
            raise ValueError("decay_on_increase must be in (0, 1]")


@dataclass
class FitTrace:
    losses: list[float] = field(default_factory=list)
    dice: list[float] = field(default_factory=list)
    direction: list[float] = field(default_factory=list)
    snapshots: list[tuple[int, np.ndarray]] = field(default_factory=list)
    best_iteration: int = 0
    converged: bool = False

    def smoothed(self, window: int = 20) -> np.ndarray:
        x = np.asarray(self.losses)
        if len(x) < window:
            return x.copy()
        return np.convolve(x, np.ones(window) / window, mode="valid")


def _target_values(target) -> np.ndarray:
    if isinstance(target, rasterizer.SoftMask):
        return target.values
    if isinstance(target, rasterizer.BinaryMask):
        return target.bits.astype(np.float64)
    raise TypeError("target must be a SoftMask or BinaryMask")


def element_loss(pts_px: np.ndarray, closed: bool, target: np.ndarray, grid, cfg: FitConfig):
    """(total, dice, direction, gradient) at pixel-unit points."""
    fld = rasterizer.field_from_pixels(pts_px, grid, closed)
    values = rasterizer.soft_values(fld, cfg.tau)
    dice, d_mask = dice_loss(values, target, denominator=cfg.dice_denominator)
    grad = cfg.dice_weight * rasterizer.soft_backward(fld, cfg.tau, d_mask)
    direction = 0.0
    if not closed and cfg.direction_weight > 0:
        direction, g_dir = direction_regularization(pts_px)
        grad = grad + cfg.direction_weight * g_dir
    total = cfg.dice_weight * dice + cfg.direction_weight * direction
    return total, dice, direction, grad


def fit_element(target, init: MapElement, cfg: FitConfig = FitConfig()) -> tuple[MapElement, FitTrace]:
    """Move ``init``'s control points to minimize dice (+ direction) loss.

    Stops after ``cfg.iterations`` or once the loss changed by less than
    ``cfg.tolerance`` over ``cfg.patience`` iterations. Returns the iterate
    with the lowest loss.
    """
    goal = _target_values(target)
    grid = target.grid
    closed = init.kind != LINE
    pts = grid.to_pixel(init.points).copy()
    m = np.zeros_like(pts)
    v = np.zeros_like(pts)
    trace = FitTrace()
    best_loss, best_pts = math.inf, pts.copy()
    step = cfg.step

    for it in range(cfg.iterations):
        loss, dice, direction, grad = element_loss(pts, closed, goal, grid, cfg)
        if not (math.isfinite(loss) and np.all(np.isfinite(grad))):
            raise FitError(f"non-finite loss or gradient at iteration {it}", trace)
        trace.losses.append(loss)
        trace.dice.append(dice)
        trace.direction.append(direction)
        if cfg.snapshot_every and it % cfg.snapshot_every == 0:
            trace.snapshots.append((it, grid.to_world(pts)))
        if it and loss > trace.losses[-2]:
            # overshoot: damp the step and drop the accumulated momentum
            step *= cfg.decay_on_increase
            m[:] = 0.0
        if loss < best_loss:
            best_loss, best_pts = loss, pts.copy()
            trace.best_iteration = it
        if it >= cfg.patience and abs(trace.losses[-1 - cfg.patience] - loss) < cfg.tolerance:
            trace.converged = True
            break
        if it == cfg.iterations - 1:
            break
        if cfg.optimizer == "adam":
            t = it + 1
            m = cfg.beta1 * m + (1 - cfg.beta1) * grad
            v = cfg.beta2 * v + (1 - cfg.beta2) * grad * grad
            m_hat = m / (1 - cfg.beta1 ** t)
            v_hat = v / (1 - cfg.beta2 ** t)
            pts = pts - step * m_hat / (np.sqrt(v_hat) + 1e-8)
        else:
            pts = pts - step * grad

    return init.with_points(grid.to_world(best_pts)), trace
