"""Differentiable rasterization of vectorized map elements, the losses built
on it, and rasterization-based / Chamfer-based AP evaluation."""
from ._backend import available_backends, get_backend, set_backend
from .geometry import GridSpec, Polygon, Polyline

__version__ = "0.1.0"

__all__ = [
    "GridSpec",
    "Polygon",
    "Polyline",
    "available_backends",
    "get_backend",
    "set_backend",
]
