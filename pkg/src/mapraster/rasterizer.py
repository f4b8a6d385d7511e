"""Soft (differentiable) and hard (binary) rasterization of map elements.

Distances are measured in pixel units: world coordinates are mapped to
continuous pixel coordinates before any distance is taken, so ``tau`` is
relative to the grid resolution. On anisotropic grids this is the per-axis
scaled Euclidean distance.

Gradients returned by the backward passes are with respect to control point
coordinates in pixel units, shape (N, 2) as (d/dx, d/dy). Use
:func:`gradient_to_world` for per-meter gradients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Union

import numpy as np

from . import _backend
from .geometry import GridSpec, Polygon, Polyline

DEFAULT_TAU = 2.0
CULL_EPS = 1e-6
# slack on the hard-line distance threshold so pixels exactly at (d + 0.5) px count
_HARD_SLACK = 1e-9

Element = Union[Polyline, Polygon]


@dataclass(frozen=True, eq=False)
class SoftMask:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.shape != self.grid.shape:
            raise ValueError(f"mask shape {self.values.shape} does not match grid {self.grid.shape}")
        if not (np.all(self.values >= 0.0) and np.all(self.values <= 1.0)):
            raise ValueError("soft mask values must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class BinaryMask:
    grid: GridSpec
    bits: np.ndarray

    def __post_init__(self) -> None:
        if self.bits.shape != self.grid.shape:
            raise ValueError(f"mask shape {self.bits.shape} does not match grid {self.grid.shape}")
        if self.bits.dtype != bool:
            object.__setattr__(self, "bits", self.bits.astype(bool))

    def count(self) -> int:
        return int(np.count_nonzero(self.bits))


class DistanceField(NamedTuple):
    """Per-pixel nearest-boundary data for one element, in pixel units.

    ``row0``/``col0`` locate the computed window inside the full grid; outside
    it (culling only) nothing was evaluated.
    """

    pts: np.ndarray
    dist: np.ndarray
    seg: np.ndarray
    t: np.ndarray
    sign: np.ndarray
    row0: int
    col0: int
    closed: bool


def check_tau(tau: float) -> float:
    tau = float(tau)
    if not (tau > 0 and math.isfinite(tau)):
        raise ValueError(f"softness tau must be positive and finite, got {tau}")
    return tau


def _points(element: Element) -> tuple[np.ndarray, bool]:
    if isinstance(element, Polygon):
        return element.vertices, True
    if isinstance(element, Polyline):
        return element.points, False
    raise TypeError(f"cannot rasterize {type(element).__name__}")


def distance_field(element: Element, grid: GridSpec, cutoff_px: float | None = None) -> DistanceField:
    """Evaluate the nearest-segment field of ``element`` at every pixel center.

    With ``cutoff_px`` only the bounding box of the element grown by that many
    pixels is evaluated.
    """
    world, closed = _points(element)
    return field_from_pixels(grid.to_pixel(world), grid, closed, cutoff_px)


def field_from_pixels(pts: np.ndarray, grid: GridSpec, closed: bool,
                      cutoff_px: float | None = None) -> DistanceField:
    """As :func:`distance_field`, for control points already in pixel units."""
    pts = np.asarray(pts, dtype=np.float64)
    h, w = grid.shape
    row0 = col0 = 0
    if cutoff_px is not None:
        lo = np.floor(pts.min(axis=0) - cutoff_px).astype(int)
        hi = np.ceil(pts.max(axis=0) + cutoff_px).astype(int)
        col0, row0 = max(0, lo[0]), max(0, lo[1])
        w = max(0, min(w, hi[0]) - col0)
        h = max(0, min(h, hi[1]) - row0)
        pts = pts - np.array([col0, row0], dtype=np.float64)
    pts = np.ascontiguousarray(pts)
    dist, seg, t, sign = _backend.distance_field(pts, h, w, closed)
    return DistanceField(pts, dist, seg, t, sign, row0, col0, closed)


def soft_values(field: DistanceField, tau: float) -> np.ndarray:
    """Soft mask values over the field's window (line or polygon by ``closed``)."""
    return _polygon_values(field, tau) if field.closed else _line_values(field, tau)


def soft_backward(field: DistanceField, tau: float, upstream: np.ndarray) -> np.ndarray:
    """Gradient of sum(upstream * I) w.r.t. the field's pixel-unit points.

    ``upstream`` covers the full grid; only the field's window is read.
    """
    h, w = field.dist.shape
    up = upstream[field.row0:field.row0 + h, field.col0:field.col0 + w]
    val = soft_values(field, tau)
    if field.closed:
        d_val = field.sign * val * (1.0 - val) / tau
    else:
        d_val = -val / tau
    weight = np.ascontiguousarray(up * d_val)
    return _backend.backward_points(field.pts, field.seg, field.t, field.dist, weight, field.closed)


def _full(field: DistanceField, grid: GridSpec, window: np.ndarray, fill: float) -> np.ndarray:
    if field.dist.shape == grid.shape:
        return window
    out = np.full(grid.shape, fill, dtype=window.dtype)
    h, w = field.dist.shape
    out[field.row0:field.row0 + h, field.col0:field.col0 + w] = window
    return out


# exp / logistic underflow or round to 1 in float64 at extreme D / tau; clamp
# to the nearest representable interior value so masks stay in (0, 1]
_TINY = np.finfo(np.float64).tiny
_BELOW_ONE = np.nextafter(1.0, 0.0)


def _line_values(field: DistanceField, tau: float) -> np.ndarray:
    return np.maximum(np.exp(-field.dist / tau), _TINY)


def _polygon_values(field: DistanceField, tau: float) -> np.ndarray:
    z = field.sign * field.dist / tau
    # numerically stable logistic
    e = np.exp(-np.abs(z))
    v = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return np.clip(v, _TINY, _BELOW_ONE)


def line_cull_radius(tau: float, eps: float = CULL_EPS) -> float:
    """Distance beyond which exp(-D/tau) < eps."""
    return tau * math.log(1.0 / eps)


def render_line_soft(line: Polyline, grid: GridSpec, tau: float = DEFAULT_TAU, *,
                     cull: bool = False, field: DistanceField | None = None) -> SoftMask:
    """exp(-D / tau) per pixel, D the pixel-unit distance to the polyline.

    With ``cull=True`` pixels outside the element's bounding box grown by
    :func:`line_cull_radius` are set to 0 instead of being evaluated.
    """
    tau = check_tau(tau)
    if field is None:
        field = distance_field(line, grid, line_cull_radius(tau) if cull else None)
    return SoftMask(grid, _full(field, grid, _line_values(field, tau), 0.0))


def render_polygon_soft(poly: Polygon, grid: GridSpec, tau: float = DEFAULT_TAU, *,
                        field: DistanceField | None = None) -> SoftMask:
    """sigmoid(C * D / tau) per pixel; C = +1 inside (even-odd), -1 outside."""
    tau = check_tau(tau)
    if field is None:
        field = distance_field(poly, grid)
    return SoftMask(grid, _full(field, grid, _polygon_values(field, tau), 0.0))


def render_soft(element: Element, grid: GridSpec, tau: float = DEFAULT_TAU, **kw) -> SoftMask:
    if isinstance(element, Polygon):
        return render_polygon_soft(element, grid, tau, **kw)
    return render_line_soft(element, grid, tau, **kw)


def _check_upstream(upstream: np.ndarray, grid: GridSpec) -> np.ndarray:
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != grid.shape:
        raise ValueError(f"upstream shape {upstream.shape} does not match grid {grid.shape}")
    return upstream


def backward_line_soft(line: Polyline, grid: GridSpec, tau: float, upstream: np.ndarray, *,
                       field: DistanceField | None = None) -> np.ndarray:
    """Gradient of sum(upstream * I_line) with respect to the line's points.

    The argmin segment is held fixed (ties resolved to the lowest index), and
    pixels exactly on the line contribute nothing.
    """
    tau = check_tau(tau)
    upstream = _check_upstream(upstream, grid)
    if field is None:
        field = distance_field(line, grid)
    return soft_backward(field, tau, upstream)


def backward_polygon_soft(poly: Polygon, grid: GridSpec, tau: float, upstream: np.ndarray, *,
                          field: DistanceField | None = None) -> np.ndarray:
    """Gradient of sum(upstream * I_polygon) with respect to the vertices.

    The inside/outside sign is treated as locally constant.
    """
    tau = check_tau(tau)
    upstream = _check_upstream(upstream, grid)
    if field is None:
        field = distance_field(poly, grid)
    return soft_backward(field, tau, upstream)


def backward_soft(element: Element, grid: GridSpec, tau: float, upstream: np.ndarray, **kw) -> np.ndarray:
    if isinstance(element, Polygon):
        return backward_polygon_soft(element, grid, tau, upstream, **kw)
    return backward_line_soft(element, grid, tau, upstream, **kw)


def gradient_to_world(grad_px: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Convert d/d(pixel coordinate) into d/d(meter)."""
    return np.asarray(grad_px) / np.array([grid.dx, grid.dy])


def _square_dilated_line(pts: np.ndarray, grid: GridSpec, half: float) -> np.ndarray:
    # pixel center within Chebyshev distance `half` of a segment iff the
    # segment meets the axis-aligned box of half-size `half` around it
    h, w = grid.shape
    qx = np.broadcast_to(np.arange(w) + 0.5, (h, w))
    qy = np.broadcast_to((np.arange(h) + 0.5)[:, None], (h, w))
    out = np.zeros((h, w), dtype=bool)
    for (ax, ay), (bx, by) in zip(pts[:-1], pts[1:]):
        lo = np.zeros((h, w))
        hi = np.ones((h, w))
        ok = np.ones((h, w), dtype=bool)
        for a, e, q in ((ax, bx - ax, qx), (ay, by - ay, qy)):
            if e == 0.0:
                ok &= np.abs(a - q) <= half + _HARD_SLACK
            else:
                t1 = (q - half - _HARD_SLACK - a) / e
                t2 = (q + half + _HARD_SLACK - a) / e
                lo = np.maximum(lo, np.minimum(t1, t2))
                hi = np.minimum(hi, np.maximum(t1, t2))
        out |= ok & (lo <= hi)
    return out


def render_line_hard(line: Polyline, grid: GridSpec, dilation_px: int = 2, *,
                     kernel: str = "disk") -> BinaryMask:
    """Pixels whose center lies within (dilation_px + 0.5) px of the line.

    ``kernel="disk"`` uses Euclidean distance (a round structuring element);
    ``kernel="square"`` uses Chebyshev distance, i.e. a supercover line
    dilated by a square.
    """
    if dilation_px < 0:
        raise ValueError("dilation_px must be >= 0")
    radius = dilation_px + 0.5
    if kernel == "disk":
        field = distance_field(line, grid, cutoff_px=radius + 1)
        bits = _full(field, grid, field.dist <= radius + _HARD_SLACK, False)
    elif kernel == "square":
        bits = _square_dilated_line(grid.to_pixel(line.points), grid, radius)
    else:
        raise ValueError(f"unknown dilation kernel {kernel!r}")
    return BinaryMask(grid, bits)


def render_polygon_hard(poly: Polygon, grid: GridSpec) -> BinaryMask:
    """Pixels whose center is inside by the even-odd rule, boundary included."""
    field = distance_field(poly, grid, cutoff_px=1.0)
    return BinaryMask(grid, _full(field, grid, field.sign > 0, False))


def render_hard(element: Element, grid: GridSpec, dilation_px: int = 2, **kw) -> BinaryMask:
    if isinstance(element, Polygon):
        return render_polygon_hard(element, grid)
    return render_line_hard(element, grid, dilation_px, **kw)


def write_pgm(mask: SoftMask, path: str | Path) -> None:
    """8-bit binary PGM (P5), value round(255 * I), row 0 first."""
    data = np.floor(np.clip(mask.values, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    h, w = data.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + data.tobytes())


def write_pbm(mask: BinaryMask, path: str | Path) -> None:
    """Binary PBM (P4), set pixels as 1 bits, row 0 first."""
    h, w = mask.bits.shape
    packed = np.packbits(mask.bits, axis=1)
    Path(path).write_bytes(f"P4\n{w} {h}\n".encode("ascii") + packed.tobytes())


def _read_header(raw: bytes, n_fields: int) -> tuple[list[bytes], int]:
    fields: list[bytes] = []
    pos = 0
    while len(fields) < n_fields:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while not raw[end:end + 1].isspace():
            end += 1
        fields.append(raw[pos:end])
        pos = end
    return fields, pos + 1


def read_pgm(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    (magic, w, h, maxval), pos = _read_header(raw, 4)
    if magic != b"P5" or int(maxval) != 255:
        raise ValueError(f"{path}: not an 8-bit P5 PGM")
    return np.frombuffer(raw, dtype=np.uint8, count=int(w) * int(h), offset=pos).reshape(int(h), int(w))


def read_pbm(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    (magic, w, h), pos = _read_header(raw, 3)
    if magic != b"P4":
        raise ValueError(f"{path}: not a P4 PBM")
    w, h = int(w), int(h)
    row_bytes = (w + 7) // 8
    packed = np.frombuffer(raw, dtype=np.uint8, count=row_bytes * h, offset=pos).reshape(h, row_bytes)
    return np.unpackbits(packed, axis=1)[:, :w].astype(bool)
