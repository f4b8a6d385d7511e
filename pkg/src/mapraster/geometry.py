"""Planar geometry kernels: point/segment distances, containment, resampling.

All functions here work on single points and are written for clarity; the
vectorized per-pixel versions live in :mod:`mapraster._fallback` and the
compiled :mod:`mapraster._kernels`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

Point2 = tuple[float, float]

MIN_POLYGON_AREA = 1e-9
# Distance at or below which a point counts as lying on a polygon boundary.
BOUNDARY_EPS = 1e-12


class GeometryError(ValueError):
    """Raised when an element violates a geometric invariant."""


def _as_points(points: Iterable[Sequence[float]]) -> np.ndarray:
    arr = np.asarray(list(points) if not isinstance(points, np.ndarray) else points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise GeometryError(f"expected a sequence of (x, y) pairs, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError("coordinates must be finite")
    return arr


def _dedupe_consecutive(arr: np.ndarray) -> np.ndarray:
    if len(arr) < 2:
        return arr
    keep = np.ones(len(arr), dtype=bool)
    keep[1:] = np.any(arr[1:] != arr[:-1], axis=1)
    return arr[keep]


def signed_area(vertices: np.ndarray) -> float:
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass(frozen=True, eq=False)
class Polyline:
    """Ordered open point set with N >= 2 distinct consecutive points.

    Consecutive duplicates are dropped on construction; ``n_removed`` records
    how many were dropped.
    """

    points: np.ndarray
    n_removed: int = 0

    def __init__(self, points: Iterable[Sequence[float]]):
        raw = _as_points(points)
        arr = _dedupe_consecutive(raw)
        if len(arr) < 2:
            raise GeometryError("polyline requires >= 2 distinct points")
        arr.setflags(write=False)
        object.__setattr__(self, "points", arr)
        object.__setattr__(self, "n_removed", len(raw) - len(arr))

    def __len__(self) -> int:
        return len(self.points)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Polyline) and np.array_equal(self.points, other.points)

    def __repr__(self) -> str:
        return f"Polyline({self.points.tolist()!r})"

    def segments(self) -> Iterable[tuple[np.ndarray, np.ndarray]]:
        for i in range(len(self.points) - 1):
            yield self.points[i], self.points[i + 1]

    def reversed(self) -> Polyline:
        return Polyline(self.points[::-1])

    def translated(self, dx: float, dy: float) -> Polyline:
        return Polyline(self.points + np.array([dx, dy]))

    def length(self) -> float:
        return float(np.sum(np.hypot(*np.diff(self.points, axis=0).T)))


@dataclass(frozen=True, eq=False)
class Polygon:
    """Implicitly closed ring of N >= 3 vertices with non-degenerate area."""

    vertices: np.ndarray
    n_removed: int = 0

    def __init__(self, vertices: Iterable[Sequence[float]]):
        raw = _as_points(vertices)
        arr = _dedupe_consecutive(raw)
        # an explicit closing vertex is redundant
        while len(arr) > 1 and np.array_equal(arr[0], arr[-1]):
            arr = arr[:-1]
        if len(arr) < 3:
            raise GeometryError("polygon requires >= 3 vertices")
        if abs(signed_area(arr)) <= MIN_POLYGON_AREA:
            raise GeometryError("polygon area is degenerate (|area| <= 1e-9 m^2)")
        arr.setflags(write=False)
        object.__setattr__(self, "vertices", arr)
        object.__setattr__(self, "n_removed", len(raw) - len(arr))

    def __len__(self) -> int:
        return len(self.vertices)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Polygon) and np.array_equal(self.vertices, other.vertices)

    def __repr__(self) -> str:
        return f"Polygon({self.vertices.tolist()!r})"

    @property
    def points(self) -> np.ndarray:
        return self.vertices

    def segments(self) -> Iterable[tuple[np.ndarray, np.ndarray]]:
        n = len(self.vertices)
        for i in range(n):
            yield self.vertices[i], self.vertices[(i + 1) % n]

    def translated(self, dx: float, dy: float) -> Polygon:
        return Polygon(self.vertices + np.array([dx, dy]))

    def ring(self) -> Polyline:
        """The boundary as an explicitly closed polyline."""
        return Polyline(np.vstack([self.vertices, self.vertices[:1]]))


@dataclass(frozen=True)
class GridSpec:
    """A BEV raster: world extent in meters and pixel dimensions.

    Row 0 sits on the ``y_min`` edge and column 0 on the ``x_min`` edge.
    """

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    width: int
    height: int

    def __post_init__(self) -> None:
        vals = (self.x_min, self.x_max, self.y_min, self.y_max)
        if not all(math.isfinite(v) for v in vals):
            raise GeometryError("grid extent must be finite")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise GeometryError("grid extent must satisfy x_min < x_max and y_min < y_max")
        if int(self.width) != self.width or int(self.height) != self.height:
            raise GeometryError("grid dimensions must be integers")
        if self.width < 1 or self.height < 1:
            raise GeometryError("grid dimensions must be >= 1")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.width

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / self.height

    def to_pixel(self, points: np.ndarray) -> np.ndarray:
        """World meters -> continuous pixel coordinates (col, row) where the
        center of pixel (r, c) is at (c + 0.5, r + 0.5)."""
        pts = np.asarray(points, dtype=np.float64)
        out = np.empty_like(pts)
        out[..., 0] = (pts[..., 0] - self.x_min) / self.dx
        out[..., 1] = (pts[..., 1] - self.y_min) / self.dy
        return out

    def to_world(self, pixels: np.ndarray) -> np.ndarray:
        px = np.asarray(pixels, dtype=np.float64)
        out = np.empty_like(px)
        out[..., 0] = self.x_min + px[..., 0] * self.dx
        out[..., 1] = self.y_min + px[..., 1] * self.dy
        return out

    def scaled(self, factor: float) -> GridSpec:
        """Same pixel dimensions with the extent scaled about the origin."""
        return GridSpec(self.x_min * factor, self.x_max * factor,
                        self.y_min * factor, self.y_max * factor,
                        self.width, self.height)


def point_segment_distance(q: Sequence[float], a: Sequence[float], b: Sequence[float]) -> float:
    """Euclidean distance from ``q`` to the closed segment ``ab``."""
    return _segment_foot(q, a, b)[0]


def _segment_foot(q, a, b) -> tuple[float, float]:
    """(distance, clamped parameter t) of the closest point a + t(b - a)."""
    qx, qy = float(q[0]), float(q[1])
    ax, ay = float(a[0]), float(a[1])
    ex, ey = float(b[0]) - ax, float(b[1]) - ay
    ll = ex * ex + ey * ey
    if ll == 0.0:
        t = 0.0
    else:
        t = ((qx - ax) * ex + (qy - ay) * ey) / ll
        t = min(1.0, max(0.0, t))
    return math.hypot(qx - (ax + t * ex), qy - (ay + t * ey)), t


def polyline_distance(q: Sequence[float], line: Polyline) -> tuple[float, int]:
    """Distance from ``q`` to ``line`` and the index of the nearest segment.

    Ties go to the lowest segment index.
    """
    best, best_k = math.inf, -1
    for k, (a, b) in enumerate(line.segments()):
        d = point_segment_distance(q, a, b)
        if d < best:
            best, best_k = d, k
    return best, best_k


def polygon_boundary_distance(q: Sequence[float], poly: Polygon) -> float:
    return min(point_segment_distance(q, a, b) for a, b in poly.segments())


def point_in_polygon_sign(q: Sequence[float], poly: Polygon) -> int:
    """+1 inside (even-odd rule) or on the boundary, -1 outside."""
    if polygon_boundary_distance(q, poly) <= BOUNDARY_EPS:
        return 1
    qx, qy = float(q[0]), float(q[1])
    inside = False
    for a, b in poly.segments():
        ax, ay, bx, by = float(a[0]), float(a[1]), float(b[0]), float(b[1])
        if (ay > qy) != (by > qy):
            x_cross = ax + (qy - ay) * (bx - ax) / (by - ay)
            if qx < x_cross:
                inside = not inside
    return 1 if inside else -1


def resample_equidistant(line: Polyline, n: int) -> Polyline:
    """``n`` points at equal arc-length spacing; endpoints kept exactly."""
    if n < 2:
        raise GeometryError("resample_equidistant requires n >= 2")
    pts = line.points
    seg_len = np.hypot(*np.diff(pts, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    targets = np.linspace(0.0, cum[-1], n)
    idx = np.clip(np.searchsorted(cum, targets, side="right") - 1, 0, len(seg_len) - 1)
    frac = (targets - cum[idx]) / seg_len[idx]
    out = pts[idx] + frac[:, None] * (pts[idx + 1] - pts[idx])
    out[0], out[-1] = pts[0], pts[-1]
    return Polyline(out)


def pixel_center(grid: GridSpec, row: int, col: int) -> Point2:
    if not (0 <= row < grid.height and 0 <= col < grid.width):
        raise IndexError(f"pixel ({row}, {col}) outside {grid.height}x{grid.width} grid")
    return (grid.x_min + (col + 0.5) * grid.dx, grid.y_min + (row + 0.5) * grid.dy)
