"""AP evaluation of vectorized map predictions.

Two match criteria share one AP machinery: IoU of hard rasterizations
(lines dilated, polygons filled) and Chamfer distance between point sets.
Detections are matched greedily one-to-one in descending confidence, TP/FP
labels are pooled over all scenes per class, and AP is the area under the
monotone precision envelope.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import rasterizer
from .elements import LINE, POLYGON, Detection, MapElement, Vocabulary, sample_points
from .geometry import GridSpec

EVAL_GRID = GridSpec(-15.0, 15.0, -30.0, 30.0, width=240, height=480)


def parse_thresholds(spec: str | Iterable[float]) -> tuple[float, ...]:
    """Threshold list from ``"start:stop:step"`` (stop inclusive) or an iterable."""
    if isinstance(spec, str):
        parts = [float(p) for p in spec.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ValueError(f"threshold range must be start:stop:step, got {spec!r}")
        start, stop, step = parts
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        values = tuple(round(start + k * step, 10) for k in range(count))
    else:
        values = tuple(float(v) for v in spec)
    if not values:
        raise ValueError("threshold list is empty")
    return values


@dataclass(frozen=True)
class EvalConfig:
    grid: GridSpec = EVAL_GRID
    line_dilation_px: int = 2
    dilation_kernel: str = "disk"
    line_iou_thresholds: tuple[float, ...] = parse_thresholds("0.25:0.50:0.05")
    polygon_iou_thresholds: tuple[float, ...] = parse_thresholds("0.50:0.75:0.05")
    chamfer_thresholds_m: tuple[float, ...] = (0.5, 1.0, 1.5)
    # None evaluates Chamfer on the raw vertices
    chamfer_resample_points: int | None = 100
    per_scene_ap: bool = False

    def __post_init__(self) -> None:
        for name in ("line_iou_thresholds", "polygon_iou_thresholds", "chamfer_thresholds_m"):
            vals = tuple(float(v) for v in getattr(self, name))
            object.__setattr__(self, name, vals)
            if not vals or any(b <= a for a, b in zip(vals, vals[1:])):
                raise ValueError(f"{name} must be non-empty and strictly increasing")
            if name == "chamfer_thresholds_m":
                if vals[0] <= 0:
                    raise ValueError("chamfer thresholds must be > 0")
            elif vals[0] <= 0 or vals[-1] > 1:
                raise ValueError(f"{name} must lie in (0, 1]")
        if self.line_dilation_px < 0:
            raise ValueError("line_dilation_px must be >= 0")
        if self.dilation_kernel not in ("disk", "square"):
            raise ValueError(f"unknown dilation kernel {self.dilation_kernel!r}")
        if self.chamfer_resample_points is not None and self.chamfer_resample_points < 2:
            raise ValueError("chamfer_resample_points must be >= 2")


@dataclass
class Scene:
    scene_id: str
    detections: list[Detection]
    gts: list[MapElement]


def chamfer_distance(p, q) -> float:
    """Half the sum of the two directed mean nearest-neighbour distances."""
    p = np.asarray(p, dtype=np.float64).reshape(-1, 2)
    q = np.asarray(q, dtype=np.float64).reshape(-1, 2)
    if len(p) == 0 or len(q) == 0:
        raise ValueError("chamfer_distance requires two non-empty point sets")
    d_pq, _ = cKDTree(q).query(p)
    d_qp, _ = cKDTree(p).query(q)
    return 0.5 * (float(np.mean(d_pq)) + float(np.mean(d_qp)))


def mask_iou(a: rasterizer.BinaryMask, b: rasterizer.BinaryMask) -> float:
    if a.grid != b.grid:
        raise ValueError("mask_iou: masks are on different grids")
    union = np.count_nonzero(a.bits | b.bits)
    if union == 0:
        return 0.0
    return np.count_nonzero(a.bits & b.bits) / union


def _greedy(scores: np.ndarray, accept: Callable[[np.ndarray], np.ndarray], prefer_max: bool) -> list[bool]:
    """One-to-one greedy match; rows are detections already in rank order."""
    claimed = np.zeros(scores.shape[1], dtype=bool)
    labels = []
    for row in scores:
        ok = accept(row) & ~claimed
        if not ok.any():
            labels.append(False)
            continue
        masked = np.where(ok, row, -np.inf if prefer_max else np.inf)
        j = int(np.argmax(masked) if prefer_max else np.argmin(masked))
        claimed[j] = True
        labels.append(True)
    return labels


def _rank(dets: Sequence[Detection]) -> list[int]:
    return sorted(range(len(dets)), key=lambda i: -dets[i].confidence)


def _hard(element: MapElement, cfg: EvalConfig) -> rasterizer.BinaryMask:
    return rasterizer.render_hard(element.geometry, cfg.grid, cfg.line_dilation_px,
                                  **({"kernel": cfg.dilation_kernel} if element.kind == LINE else {}))


def iou_matrix(dets: Sequence[Detection], gts: Sequence[MapElement], cfg: EvalConfig) -> np.ndarray:
    dm = [_hard(d.element, cfg) for d in dets]
    gm = [_hard(g, cfg) for g in gts]
    return np.array([[mask_iou(a, b) for b in gm] for a in dm]).reshape(len(dm), len(gm))


def chamfer_matrix(dets: Sequence[Detection], gts: Sequence[MapElement], cfg: EvalConfig) -> np.ndarray:
    def pts(el: MapElement) -> np.ndarray:
        if cfg.chamfer_resample_points is None:
            return el.points
        return sample_points(el.geometry, cfg.chamfer_resample_points)

    dp = [pts(d.element) for d in dets]
    gp = [pts(g) for g in gts]
    return np.array([[chamfer_distance(a, b) for b in gp] for a in dp]).reshape(len(dp), len(gp))


def match_detections_raster(dets: Sequence[Detection], gts: Sequence[MapElement],
                            iou_threshold: float, cfg: EvalConfig = EvalConfig()) -> list[tuple[float, bool]]:
    """(confidence, is_tp) for each detection, highest confidence first."""
    order = _rank(dets)
    ious = iou_matrix([dets[i] for i in order], gts, cfg)
    labels = _greedy(ious, lambda row: row >= iou_threshold, prefer_max=True)
    return [(dets[i].confidence, tp) for i, tp in zip(order, labels)]


def match_detections_chamfer(dets: Sequence[Detection], gts: Sequence[MapElement],
                             threshold_m: float, cfg: EvalConfig = EvalConfig()) -> list[tuple[float, bool]]:
    order = _rank(dets)
    dist = chamfer_matrix([dets[i] for i in order], gts, cfg)
    labels = _greedy(dist, lambda row: row <= threshold_m, prefer_max=False)
    return [(dets[i].confidence, tp) for i, tp in zip(order, labels)]


def pr_curve(labels: Sequence[bool], n_gt: int) -> list[tuple[float, float]]:
    """(recall, precision) after each ranked detection."""
    out = []
    tp = 0
    for k, is_tp in enumerate(labels, start=1):
        tp += bool(is_tp)
        out.append((tp / n_gt if n_gt > 0 else 0.0, tp / k))
    return out


def average_precision(labels: Sequence[bool], n_gt: int) -> float:
    """All-point AP over ranked TP/FP labels with the monotone precision envelope."""
    if n_gt < 0:
        raise ValueError("n_gt must be >= 0")
    if n_gt == 0:
        return 0.0 if len(labels) else 1.0
    if not len(labels):
        return 0.0
    tp = np.cumsum(np.asarray(labels, dtype=bool))
    k = np.arange(1, len(tp) + 1)
    recall = tp / n_gt
    precision = tp / k
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    d_recall = np.diff(np.concatenate([[0.0], recall]))
    return float(np.sum(d_recall * envelope))


@dataclass
class ClassReport:
    name: str
    kind: str
    thresholds: tuple[float, ...]
    ap_per_threshold: list[float]
    n_gt: int
    n_det: int
    pr: list[list[tuple[float, float]]] = field(default_factory=list)

    @property
    def ap(self) -> float:
        return float(np.mean(self.ap_per_threshold))


@dataclass
class APReport:
    metric: str
    classes: list[ClassReport]

    @property
    def mean_ap(self) -> float:
        if not self.classes:
            return 0.0
        return float(np.mean([c.ap for c in self.classes]))

    def __getitem__(self, name: str) -> ClassReport:
        for c in self.classes:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "mean_ap": self.mean_ap,
            "classes": {
                c.name: {
                    "kind": c.kind,
                    "ap": c.ap,
                    "n_gt": c.n_gt,
                    "n_det": c.n_det,
                    "thresholds": list(c.thresholds),
                    "ap_per_threshold": list(c.ap_per_threshold),
                }
                for c in self.classes
            },
        }

    def pr_rows(self) -> list[tuple[str, float, float, float]]:
        rows = []
        for c in self.classes:
            for thr, curve in zip(c.thresholds, c.pr):
                rows.extend((c.name, thr, r, p) for r, p in curve)
        return rows


def _check_scene(scene: Scene, vocab: Vocabulary) -> None:
    for el in [d.element for d in scene.detections] + list(scene.gts):
        try:
            kind = vocab.kind(el.class_id)
        except KeyError:
            raise ValueError(f"scene {scene.scene_id}: unknown class id {el.class_id}") from None
        if kind != el.kind:
            raise ValueError(f"scene {scene.scene_id}: class {vocab.names[el.class_id]!r} "
                             f"is {kind}-shaped but element is a {el.kind}")


def _scene_matrices(scene: Scene, vocab: Vocabulary, cfg: EvalConfig, pairwise) -> dict:
    out = {}
    for cid in range(len(vocab)):
        dets = [d for d in scene.detections if d.element.class_id == cid]
        gts = [g for g in scene.gts if g.class_id == cid]
        if not dets and not gts:
            continue
        order = _rank(dets)
        ranked = [dets[i] for i in order]
        out[cid] = ([d.confidence for d in ranked], pairwise(ranked, gts, cfg), len(gts))
    return out


def _evaluate(scenes: Sequence[Scene], vocab: Vocabulary, cfg: EvalConfig, metric: str,
              workers: int) -> APReport:
    for s in scenes:
        _check_scene(s, vocab)
    ids = [s.scene_id for s in scenes]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate scene ids in dataset")
    pairwise = iou_matrix if metric == "raster" else chamfer_matrix
    job = lambda s: _scene_matrices(s, vocab, cfg, pairwise)  # noqa: E731
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_scene = list(pool.map(job, scenes))
    else:
        per_scene = [job(s) for s in scenes]
    # pooled ranking must not depend on scene order
    by_id = sorted(zip(ids, per_scene), key=lambda t: t[0])

    classes = []
    for cid, (name, kind) in enumerate(zip(vocab.names, vocab.kinds)):
        present = [(sid, m[cid]) for sid, m in by_id if cid in m]
        if not present:
            continue
        if metric == "raster":
            thresholds = cfg.line_iou_thresholds if kind == LINE else cfg.polygon_iou_thresholds
            accept = lambda row, thr: row >= thr  # noqa: E731
            prefer_max = True
        else:
            thresholds = cfg.chamfer_thresholds_m
            accept = lambda row, thr: row <= thr  # noqa: E731
            prefer_max = False
        n_gt = sum(n for _, (_, _, n) in present)
        n_det = sum(len(c) for _, (c, _, _) in present)
        aps, curves = [], []
        for thr in thresholds:
            pooled = []
            per_scene_aps = []
            for sid, (conf, mat, ng) in present:
                labels = _greedy(mat, lambda row: accept(row, thr), prefer_max)
                pooled.extend((-c, sid, k, tp) for k, (c, tp) in enumerate(zip(conf, labels)))
                per_scene_aps.append(average_precision(labels, ng))
            pooled.sort(key=lambda t: t[:3])
            ranked = [t[3] for t in pooled]
            if cfg.per_scene_ap:
                aps.append(float(np.mean(per_scene_aps)))
            else:
                aps.append(average_precision(ranked, n_gt))
            curves.append(pr_curve(ranked, n_gt))
        classes.append(ClassReport(name, kind, tuple(thresholds), aps, n_gt, n_det, curves))
    return APReport(metric, classes)


def evaluate_raster(scenes: Sequence[Scene], vocab: Vocabulary, cfg: EvalConfig = EvalConfig(),
                    workers: int = 1) -> APReport:
    """Rasterization-based AP: IoU of hard masks at each class's thresholds."""
    return _evaluate(scenes, vocab, cfg, "raster", workers)


def evaluate_chamfer(scenes: Sequence[Scene], vocab: Vocabulary, cfg: EvalConfig = EvalConfig(),
                     workers: int = 1) -> APReport:
    """Chamfer-distance AP, averaged over ``cfg.chamfer_thresholds_m``."""
    return _evaluate(scenes, vocab, cfg, "chamfer", workers)
