"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy fallback.
``set_backend`` switches explicitly (benchmarks and cross-checks use it).
"""
from __future__ import annotations

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_BACKENDS = {"python": _fallback}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled

_active = _BACKENDS.get("cython", _fallback)


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def get_backend() -> str:
    return "cython" if _active is _compiled and _compiled is not None else "python"


def set_backend(name: str) -> None:
    global _active
    try:
        _active = _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {available_backends()}") from None


def distance_field(pts, height, width, closed):
    return _active.distance_field(pts, height, width, closed)


def backward_points(pts, seg, tt, dist, weight, closed):
    return _active.backward_points(pts, seg, tt, dist, weight, closed)
