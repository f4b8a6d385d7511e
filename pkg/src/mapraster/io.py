"""Scene and config files (JSON) and deterministic output writers."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Sequence

from .elements import KINDS, Detection, MapElement, Vocabulary
from .geometry import GeometryError, GridSpec, Polygon
from .losses import LossWeights
from .metrics import EVAL_GRID, EvalConfig, Scene, parse_thresholds

SIG_DIGITS = 9


class SceneError(ValueError):
    """A scene or config file failed validation."""


@dataclass
class ElementRecord:
    class_name: str
    kind: str
    geometry: Any
    confidence: float | None = None
    n_removed: int = 0


@dataclass
class SceneFile:
    scene_id: str
    vocabulary: Vocabulary
    elements: list[ElementRecord]

    @property
    def n_removed(self) -> int:
        return sum(e.n_removed for e in self.elements)

    def map_elements(self) -> list[MapElement]:
        return [MapElement(self.vocabulary.index(e.class_name), e.geometry) for e in self.elements]

    def detections(self) -> list[Detection]:
        return [Detection(el, rec.confidence)
                for el, rec in zip(self.map_elements(), self.elements)]


def round_sig(x: float, digits: int = SIG_DIGITS) -> float:
    if x == 0 or not math.isfinite(x):
        return x
    return float(f"{x:.{digits}g}")


def _rounded(obj):
    if isinstance(obj, float):
        return round_sig(obj)
    if isinstance(obj, dict):
        return {str(k): _rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalar
        return _rounded(obj.item())
    return obj


def dumps(obj) -> str:
    """Stable JSON text: sorted keys, floats at 9 significant digits."""
    return json.dumps(_rounded(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(obj, path: str | Path) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def write_csv(rows: Sequence[Sequence], header: Sequence[str], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.{SIG_DIGITS}g}" if isinstance(v, float) else v for v in row])


def _read_json(path: str | Path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise SceneError(f"{path}: file not found") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SceneError(f"{path}: malformed JSON ({exc})") from None


def _vocabulary(doc, path) -> Vocabulary:
    vocab = doc.get("vocabulary")
    if not isinstance(vocab, list) or not vocab:
        raise SceneError(f"{path}: missing or empty 'vocabulary' list")
    try:
        return Vocabulary.from_pairs((v["name"], v["kind"]) for v in vocab)
    except (KeyError, TypeError, ValueError) as exc:
        raise SceneError(f"{path}: invalid vocabulary ({exc})") from None


def parse_scene(doc: dict, path: str = "<scene>", role: str | None = None) -> SceneFile:
    """Validate a scene document. ``role`` is "gt", "pred" or None (either)."""
    if not isinstance(doc, dict):
        raise SceneError(f"{path}: top level must be an object")
    scene_id = doc.get("scene_id")
    if not isinstance(scene_id, str) or not scene_id:
        raise SceneError(f"{path}: 'scene_id' must be a non-empty string")
    vocab = _vocabulary(doc, path)
    raw = doc.get("elements")
    if not isinstance(raw, list):
        raise SceneError(f"{path}: 'elements' must be a list")

    elements = []
    for i, item in enumerate(raw):
        where = f"{path}: element {i}"
        if not isinstance(item, dict):
            raise SceneError(f"{where}: must be an object")
        unknown = set(item) - {"class", "kind", "points", "confidence"}
        if unknown:
            raise SceneError(f"{where}: unknown keys {sorted(unknown)}")
        name, kind = item.get("class"), item.get("kind")
        if name not in vocab.names:
            raise SceneError(f"{where}: unknown class {name!r}")
        if kind not in KINDS:
            raise SceneError(f"{where}: kind must be 'line' or 'polygon', got {kind!r}")
        if vocab.kind(vocab.index(name)) != kind:
            raise SceneError(f"{where}: class {name!r} is declared {vocab.kind(vocab.index(name))}-shaped")
        conf = item.get("confidence")
        if role == "gt" and conf is not None:
            raise SceneError(f"{where}: ground-truth elements must not carry a confidence")
        if role == "pred" and conf is None:
            raise SceneError(f"{where}: prediction elements require a confidence")
        if conf is not None:
            if isinstance(conf, bool) or not isinstance(conf, (int, float)) or not 0.0 <= conf <= 1.0:
                raise SceneError(f"{where}: confidence must be a number in [0, 1]")
            conf = float(conf)
        pts = item.get("points")
        if (not isinstance(pts, list) or
                any(not isinstance(p, list) or len(p) != 2 or
                    any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in p) for p in pts)):
            raise SceneError(f"{where}: 'points' must be a list of [x, y] number pairs")
        try:
            geom = MapElement.build(0, kind, pts).geometry
        except GeometryError as exc:
            raise SceneError(f"{where}: {exc}") from None
        elements.append(ElementRecord(name, kind, geom, conf, geom.n_removed))
    return SceneFile(scene_id, vocab, elements)


def load_scene(path: str | Path, role: str | None = None) -> SceneFile:
    return parse_scene(_read_json(path), str(path), role)


def scene_to_dict(scene: SceneFile) -> dict:
    elements = []
    for e in scene.elements:
        item = {"class": e.class_name, "kind": e.kind, "points": e.geometry.points.tolist()}
        if e.confidence is not None:
            item["confidence"] = e.confidence
        elements.append(item)
    return {
        "scene_id": scene.scene_id,
        "vocabulary": [{"name": n, "kind": k} for n, k in zip(scene.vocabulary.names, scene.vocabulary.kinds)],
        "elements": elements,
    }


def write_scene(scene: SceneFile, path: str | Path) -> None:
    """Write with full float precision so that loading round-trips exactly."""
    Path(path).write_text(json.dumps(scene_to_dict(scene), sort_keys=True, indent=2) + "\n", encoding="utf-8")


def pair_scenes(gt_files: Sequence[SceneFile], pred_files: Sequence[SceneFile]) -> tuple[list[Scene], Vocabulary]:
    """Join GT and prediction files by scene id into an evaluation dataset."""
    if not gt_files:
        raise SceneError("no ground-truth scenes given")
    vocab = gt_files[0].vocabulary
    for f in list(gt_files) + list(pred_files):
        if f.vocabulary != vocab:
            raise SceneError(f"scene {f.scene_id}: vocabulary differs from {gt_files[0].scene_id}")
    preds = {}
    for f in pred_files:
        if f.scene_id in preds:
            raise SceneError(f"duplicate prediction scene {f.scene_id}")
        preds[f.scene_id] = f
    scenes, seen = [], set()
    for g in gt_files:
        if g.scene_id in seen:
            raise SceneError(f"duplicate ground-truth scene {g.scene_id}")
        seen.add(g.scene_id)
        p = preds.pop(g.scene_id, None)
        dets = p.detections() if p is not None else []
        scenes.append(Scene(g.scene_id, dets, g.map_elements()))
    if preds:
        raise SceneError(f"prediction scenes without ground truth: {sorted(preds)}")
    return scenes, vocab


@dataclass
class FitSettings:
    iterations: int = 1000
    step: float = 0.1
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    dice_weight: float = 1.0
    direction_weight: float = 0.0
    tolerance: float = 1e-6
    patience: int = 20
    frame_every: int = 0


@dataclass
class ToolConfig:
    """Every tunable of the toolkit; file keys mirror these fields."""

    grid: GridSpec = EVAL_GRID
    train_grid: GridSpec = GridSpec(-15.0, 15.0, -30.0, 30.0, width=128, height=256)
    tau: float = 2.0
    line_dilation_px: int = 2
    dilation_kernel: str = "disk"
    line_iou_thresholds: tuple[float, ...] = parse_thresholds("0.25:0.50:0.05")
    polygon_iou_thresholds: tuple[float, ...] = parse_thresholds("0.50:0.75:0.05")
    chamfer_thresholds_m: tuple[float, ...] = (0.5, 1.0, 1.5)
    chamfer_resample_points: int | None = 100
    per_scene_ap: bool = False
    matching_weights: tuple[float, float, float] = (2.0, 2.0, 0.05)
    loss_weights: tuple[float, float, float, float] = (2.0, 2.0, 0.005, 0.05)
    fit: FitSettings = field(default_factory=FitSettings)
    workers: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise SceneError("tau must be positive")
        if self.workers < 1:
            raise SceneError("workers must be >= 1")
        try:
            self.eval_config()
            LossWeights.matching(*self.matching_weights)
            LossWeights(*self.loss_weights)
        except (ValueError, TypeError) as exc:
            raise SceneError(str(exc)) from None
        f = self.fit
        if f.iterations < 1 or not f.step > 0:
            raise SceneError("fit.iterations must be >= 1 and fit.step > 0")
        if f.optimizer not in ("adam", "gd"):
            raise SceneError(f"fit.optimizer must be 'adam' or 'gd', got {f.optimizer!r}")

    def eval_config(self) -> EvalConfig:
        return EvalConfig(self.grid, self.line_dilation_px, self.dilation_kernel,
                          self.line_iou_thresholds, self.polygon_iou_thresholds,
                          self.chamfer_thresholds_m, self.chamfer_resample_points, self.per_scene_ap)

    def to_dict(self) -> dict:
        d = asdict(self)
        return d


def _grid(value, key) -> GridSpec:
    if not isinstance(value, dict):
        raise SceneError(f"config: {key!r} must be an object")
    names = {f.name for f in fields(GridSpec)}
    if set(value) != names:
        raise SceneError(f"config: {key!r} needs exactly the keys {sorted(names)}")
    try:
        return GridSpec(**value)
    except (GeometryError, TypeError) as exc:
        raise SceneError(f"config: {key}: {exc}") from None


def parse_config(doc: dict, path: str = "<config>") -> ToolConfig:
    if not isinstance(doc, dict):
        raise SceneError(f"{path}: config must be an object")
    known = {f.name for f in fields(ToolConfig)}
    unknown = set(doc) - known
    if unknown:
        raise SceneError(f"{path}: unknown config keys {sorted(unknown)}")
    kw = {}
    try:
        for key, value in doc.items():
            if key in ("grid", "train_grid"):
                kw[key] = _grid(value, key)
            elif key.endswith("_thresholds") or key == "chamfer_thresholds_m":
                kw[key] = parse_thresholds(value)
            elif key in ("matching_weights", "loss_weights"):
                kw[key] = tuple(float(v) for v in value)
            elif key == "fit":
                fit_known = {f.name for f in fields(FitSettings)}
                if not isinstance(value, dict) or set(value) - fit_known:
                    raise SceneError(f"{path}: 'fit' accepts only {sorted(fit_known)}")
                kw[key] = FitSettings(**value)
            else:
                kw[key] = value
        return ToolConfig(**kw)
    except SceneError as exc:
        raise SceneError(f"{path}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise SceneError(f"{path}: invalid config ({exc})") from None


def load_config(path: str | Path | None) -> ToolConfig:
    if path is None:
        return ToolConfig()
    return parse_config(_read_json(path), str(path))


def element_record_from(element: MapElement, vocab: Vocabulary, confidence: float | None = None) -> ElementRecord:
    kind = "polygon" if isinstance(element.geometry, Polygon) else "line"
    return ElementRecord(vocab.names[element.class_id], kind, element.geometry, confidence)
