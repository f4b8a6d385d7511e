"""Constructed scenes with known outcomes.

``evaluation_cases`` reproduces four situations where the Chamfer and raster
metrics disagree; ``fit_suite`` is the synthetic target set for the fitting
demo.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .elements import MapElement, Vocabulary
from .geometry import GridSpec

LANE_VOCAB = Vocabulary(("divider", "ped_crossing", "boundary"), ("line", "polygon", "line"))
# the Chamfer judgment is taken at this threshold
CHAMFER_JUDGE_M = 1.0


@dataclass(frozen=True)
class EvaluationCase:
    name: str
    description: str
    gt: MapElement
    pred: MapElement
    chamfer_match: bool
    raster_match: bool


def _line(points) -> MapElement:
    return MapElement.build(0, "line", points)


def evaluation_cases(scale: float = 1.0) -> list[EvaluationCase]:
    """Four GT/prediction pairs in meters; ``scale`` shrinks or grows case (a)."""
    s = scale
    return [
        EvaluationCase(
            "a_perpendicular_stopline",
            "2 m stopline predicted perpendicular to the GT about the shared midpoint",
            _line([(-1.0 * s, 0.0), (1.0 * s, 0.0)]),
            _line([(0.0, -1.0 * s), (0.0, 1.0 * s)]),
            chamfer_match=True, raster_match=False,
        ),
        EvaluationCase(
            "b_lateral_shift",
            "40 m lane predicted 0.9 m to the side",
            _line([(0.0, -20.0), (0.0, 20.0)]),
            _line([(0.9, -20.0), (0.9, 20.0)]),
            chamfer_match=True, raster_match=False,
        ),
        EvaluationCase(
            "c_vertical_truncation",
            "40 m lane predicted only over its first 20 m (occluded far end)",
            _line([(0.0, -20.0), (0.0, 20.0)]),
            _line([(0.0, -20.0), (0.0, 0.0)]),
            chamfer_match=False, raster_match=True,
        ),
        EvaluationCase(
            "d_local_kink",
            "4 m lane piece predicted with its midpoint kinked 1.5 m sideways",
            _line([(0.0, -2.0), (0.0, 2.0)]),
            _line([(0.0, -2.0), (1.5, 0.0), (0.0, 2.0)]),
            chamfer_match=True, raster_match=False,
        ),
    ]


def write_case_files(directory: str | Path) -> dict:
    """Write one GT and one prediction scene per case plus ``manifest.json``."""
    from .io import ElementRecord, SceneFile, write_json, write_scene

    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"chamfer_threshold_m": CHAMFER_JUDGE_M, "cases": {}}
    for case in evaluation_cases():
        gt = SceneFile(case.name, LANE_VOCAB, [ElementRecord("divider", "line", case.gt.geometry)])
        pred = SceneFile(case.name, LANE_VOCAB, [ElementRecord("divider", "line", case.pred.geometry, 1.0)])
        write_scene(gt, out / f"{case.name}.gt.json")
        write_scene(pred, out / f"{case.name}.pred.json")
        manifest["cases"][case.name] = {
            "description": case.description,
            "chamfer_match": case.chamfer_match,
            "raster_match": case.raster_match,
        }
    write_json(manifest, out / "manifest.json")
    return manifest


FIT_GRID = GridSpec(0.0, 64.0, 0.0, 64.0, width=64, height=64)


@dataclass(frozen=True)
class FitTarget:
    name: str
    target: MapElement
    init: MapElement


def _s_curve(n: int, amplitude: float, phase: float = 0.0) -> np.ndarray:
    s = np.linspace(0.0, 1.0, n)
    return np.stack([8.0 + 48.0 * s, 32.0 + amplitude * np.sin(2.0 * np.pi * s + phase)], axis=1)


def fit_suite() -> list[FitTarget]:
    """Ten targets on :data:`FIT_GRID` (1 m = 1 px): offset lines, scaled
    squares and S-curves."""
    c = np.array([32.0, 32.0])
    square = np.array([(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)])
    diamond = np.array([(0.0, -1.0), (1.0, 0.0), (0.0, 1.0), (-1.0, 0.0)])
    d = 3.0 / np.sqrt(2.0)
    straight = _s_curve(10, 0.0)
    poly = lambda pts: MapElement.build(1, "polygon", pts)  # noqa: E731
    return [
        FitTarget("line_horizontal", _line([(8, 30.3), (56, 30.3)]), _line([(8, 33.3), (56, 33.3)])),
        FitTarget("line_diagonal", _line([(10, 10), (54, 54)]), _line([(10 + d, 10 - d), (54 + d, 54 - d)])),
        FitTarget("line_bent", _line([(8, 10), (32, 40), (56, 20)]), _line([(8, 13), (32, 43), (56, 23)])),
        FitTarget("square_large", poly(c + 16 * square), poly(c + 11 * square)),
        FitTarget("square_small", poly(c + 10 * square), poly(c + 6 * square)),
        FitTarget("diamond", poly(c + [0.3, 0.0] + 18 * diamond), poly(c + [0.3, 0.0] + 12 * diamond)),
        FitTarget("s_curve_8", _line(_s_curve(40, 8.0)), _line(straight)),
        FitTarget("s_curve_12", _line(_s_curve(40, 12.0)), _line(straight)),
        FitTarget("s_curve_10_shifted", _line(_s_curve(40, 10.0, 0.5)), _line(straight)),
        FitTarget("s_curve_14", _line(_s_curve(40, 14.0)), _line(straight)),
    ]


def folded_init(n_fold: int = 8) -> np.ndarray:
    """An 8-point straight chord whose second and third points fold back."""
    xs = [8.0, 20.0, 12.0, 24.0, 32.0, 40.0, 48.0, 56.0][:n_fold]
    return np.stack([xs, [32.0] * len(xs)], axis=1)


def s_curve_target(amplitude: float = 14.0) -> MapElement:
    return _line(_s_curve(40, amplitude))
