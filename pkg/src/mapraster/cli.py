"""Command-line entry point: ``mapraster rasterize | eval | fit | fixtures``.

Exit codes: 0 success, 1 usage error, 2 validation error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import rasterizer
from .fit import FitConfig, FitError, fit_element
from .io import (SceneError, SceneFile, element_record_from, load_config, load_scene, pair_scenes,
                 scene_to_dict, write_csv, write_json)
from .metrics import evaluate_chamfer, evaluate_raster

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mapraster", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("rasterize", help="render every element of a scene to PGM/PBM")
    p.add_argument("--in", dest="scene", required=True, type=Path)
    p.add_argument("--config", type=Path)
    p.add_argument("--mode", choices=("soft", "hard"), required=True)
    p.add_argument("--out", required=True, type=Path, help="output directory")

    p = sub.add_parser("eval", help="AP evaluation of prediction scenes against ground truth")
    p.add_argument("metric", choices=("raster", "chamfer"))
    p.add_argument("--pred", nargs="+", required=True, type=Path)
    p.add_argument("--gt", nargs="+", required=True, type=Path)
    p.add_argument("--config", type=Path)
    p.add_argument("--workers", type=int, help="overrides the config's worker count")
    p.add_argument("--out", required=True, type=Path, help="report JSON; PR curves go to <stem>_pr.csv")

    p = sub.add_parser("fit", help="fit an element to the soft render of a target element")
    p.add_argument("--target", required=True, type=Path)
    p.add_argument("--init", required=True, type=Path)
    p.add_argument("--config", type=Path)
    p.add_argument("--out", required=True, type=Path, help="fitted scene JSON; trace goes to <stem>_trace.csv")
    p.add_argument("--frames", type=Path, help="directory for per-iteration PGM frames")

    p = sub.add_parser("fixtures", help="write the metric-comparison fixture scenes")
    p.add_argument("--out", required=True, type=Path)
    return parser


def _rasterize(args) -> int:
    cfg = load_config(args.config)
    scene = load_scene(args.scene)
    args.out.mkdir(parents=True, exist_ok=True)
    index = []
    for i, rec in enumerate(scene.elements):
        if args.mode == "soft":
            mask = rasterizer.render_soft(rec.geometry, cfg.grid, cfg.tau)
            name = f"element_{i:04d}.pgm"
            rasterizer.write_pgm(mask, args.out / name)
            summary = {"mass": float(mask.values.sum())}
        else:
            mask = rasterizer.render_hard(rec.geometry, cfg.grid, cfg.line_dilation_px,
                                          **({"kernel": cfg.dilation_kernel} if rec.kind == "line" else {}))
            name = f"element_{i:04d}.pbm"
            rasterizer.write_pbm(mask, args.out / name)
            summary = {"pixels": mask.count()}
        index.append({"index": i, "class": rec.class_name, "kind": rec.kind, "file": name, **summary})
    write_json({"scene_id": scene.scene_id, "mode": args.mode, "grid": cfg.to_dict()["grid"],
                "tau": cfg.tau, "elements": index}, args.out / "index.json")
    return EXIT_OK


def _eval(args) -> int:
    cfg = load_config(args.config)
    workers = args.workers if args.workers is not None else cfg.workers
    if workers < 1:
        raise UsageError("--workers must be >= 1")
    gts = [load_scene(p, role="gt") for p in args.gt]
    preds = [load_scene(p, role="pred") for p in args.pred]
    scenes, vocab = pair_scenes(gts, preds)
    evaluate = evaluate_raster if args.metric == "raster" else evaluate_chamfer
    report = evaluate(scenes, vocab, cfg.eval_config(), workers=workers)
    write_json(report.to_dict(), args.out)
    write_csv(report.pr_rows(), ("class", "threshold", "recall", "precision"),
              args.out.with_name(args.out.stem + "_pr.csv"))
    return EXIT_OK


def _single(scene: SceneFile, path) -> tuple:
    if len(scene.elements) != 1:
        raise SceneError(f"{path}: fit expects exactly one element, found {len(scene.elements)}")
    return scene.map_elements()[0], scene.elements[0]


def _fit(args) -> int:
    cfg = load_config(args.config)
    target_scene = load_scene(args.target)
    init_scene = load_scene(args.init)
    target, _ = _single(target_scene, args.target)
    init, init_rec = _single(init_scene, args.init)
    if target.kind != init.kind:
        raise SceneError("fit: target and init must both be lines or both polygons")
    f = cfg.fit
    frame_every = f.frame_every or (10 if args.frames else 0)
    fit_cfg = FitConfig(iterations=f.iterations, step=f.step, optimizer=f.optimizer, beta1=f.beta1,
                        beta2=f.beta2, tau=cfg.tau, dice_weight=f.dice_weight,
                        direction_weight=f.direction_weight, tolerance=f.tolerance,
                        patience=f.patience, snapshot_every=frame_every)
    goal = rasterizer.render_soft(target.geometry, cfg.train_grid, cfg.tau)
    fitted, trace = fit_element(goal, init, fit_cfg)

    rec = element_record_from(fitted, init_scene.vocabulary, init_rec.confidence)
    out_scene = SceneFile(init_scene.scene_id, init_scene.vocabulary, [rec])
    doc = scene_to_dict(out_scene)
    doc["fit"] = {"iterations": len(trace.losses), "best_iteration": trace.best_iteration,
                  "best_loss": trace.losses[trace.best_iteration], "converged": trace.converged}
    write_json(doc, args.out)
    rows = [(i, trace.losses[i], trace.dice[i], trace.direction[i]) for i in range(len(trace.losses))]
    write_csv(rows, ("iteration", "loss", "dice", "direction"), args.out.with_name(args.out.stem + "_trace.csv"))
    if args.frames:
        args.frames.mkdir(parents=True, exist_ok=True)
        for it, pts in trace.snapshots:
            el = init.with_points(pts)
            rasterizer.write_pgm(rasterizer.render_soft(el.geometry, cfg.train_grid, cfg.tau),
                                 args.frames / f"frame_{it:05d}.pgm")
    return EXIT_OK


def _fixtures(args) -> int:
    from .fixtures import write_case_files
    write_case_files(args.out)
    return EXIT_OK


COMMANDS = {"rasterize": _rasterize, "eval": _eval, "fit": _fit, "fixtures": _fixtures}


def run_command(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SceneError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (FitError, ArithmeticError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
