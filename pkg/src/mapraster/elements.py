"""Classed map elements, detections and the class vocabulary."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .geometry import GeometryError, Polygon, Polyline, resample_equidistant

LINE = "line"
POLYGON = "polygon"
KINDS = (LINE, POLYGON)

Geometry = Union[Polyline, Polygon]


@dataclass(frozen=True)
class Vocabulary:
    """Ordered class names with a fixed line/polygon kind per class."""

    names: tuple[str, ...]
    kinds: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.names) != len(self.kinds):
            raise ValueError("vocabulary names and kinds differ in length")
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate class name in vocabulary")
        for kind in self.kinds:
            if kind not in KINDS:
                raise ValueError(f"unknown element kind {kind!r}")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> Vocabulary:
        pairs = list(pairs)
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown class {name!r}") from None

    def kind(self, class_id: int) -> str:
        if not 0 <= class_id < len(self.kinds):
            raise KeyError(f"unknown class id {class_id}")
        return self.kinds[class_id]


@dataclass(frozen=True)
class MapElement:
    class_id: int
    geometry: Geometry

    @property
    def kind(self) -> str:
        return POLYGON if isinstance(self.geometry, Polygon) else LINE

    @property
    def points(self) -> np.ndarray:
        return self.geometry.points

    @classmethod
    def build(cls, class_id: int, kind: str, points: Sequence[Sequence[float]]) -> MapElement:
        if kind == LINE:
            return cls(class_id, Polyline(points))
        if kind == POLYGON:
            return cls(class_id, Polygon(points))
        raise GeometryError(f"unknown element kind {kind!r}")

    def with_points(self, points: np.ndarray) -> MapElement:
        return MapElement.build(self.class_id, self.kind, points)


@dataclass(frozen=True)
class Detection:
    element: MapElement
    confidence: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


def sample_points(geometry: Geometry, n: int) -> np.ndarray:
    """``n`` points spaced equally by arc length along the element.

    Polygons are walked around their closed boundary starting at vertex 0;
    the repeated closing point is dropped.
    """
    if isinstance(geometry, Polygon):
        return resample_equidistant(geometry.ring(), n + 1).points[:-1]
    return resample_equidistant(geometry, n).points
