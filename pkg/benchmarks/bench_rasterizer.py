"""Time soft forward + backward on every available backend.

    python benchmarks/bench_rasterizer.py                  # compare against baseline.json
    python benchmarks/bench_rasterizer.py --update-baseline

Exits 1 if a backend is more than 2x slower than its recorded baseline.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

import mapraster
from mapraster import rasterizer as R
from mapraster.elements import MapElement
from mapraster.geometry import GridSpec

BASELINE = Path(__file__).with_name("baseline.json")
REGRESSION_FACTOR = 2.0
BUDGET_MS = 500.0


def workload(seed: int = 5):
    rng = np.random.default_rng(seed)
    grid = GridSpec(-15.0, 15.0, -30.0, 30.0, width=128, height=256)
    elements = []
    for k in range(50):
        if k % 2:
            pts = np.cumsum(rng.normal(0, 1.5, (20, 2)), axis=0) + rng.uniform([-10, -25], [10, 25])
            elements.append(MapElement.build(0, "line", pts))
        else:
            ang = np.sort(rng.uniform(0, 2 * np.pi, 20)) + np.arange(20) * 1e-3
            r = rng.uniform(2, 6, 20)
            elements.append(MapElement.build(1, "polygon", np.stack([r * np.cos(ang), r * np.sin(ang)], 1)))
    return grid, elements, rng.uniform(-1, 1, grid.shape)


def run_once(grid, elements, upstream) -> float:
    t0 = time.perf_counter()
    for el in elements:
        fld = R.distance_field(el.geometry, grid)
        R.soft_values(fld, 2.0)
        R.soft_backward(fld, 2.0, upstream)
    return 1e3 * (time.perf_counter() - t0)


def measure(repeats: int) -> dict[str, float]:
    grid, elements, up = workload()
    previous = mapraster.get_backend()
    out = {}
    try:
        for name in mapraster.available_backends():
            mapraster.set_backend(name)
            run_once(grid, elements[:2], up)  # warm-up
            out[name] = min(run_once(grid, elements, up) for _ in range(repeats))
    finally:
        mapraster.set_backend(previous)
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--update-baseline", action="store_true")
    args = ap.parse_args(argv)

    timings = measure(args.repeats)
    baseline = json.loads(BASELINE.read_text()) if BASELINE.exists() else {}
    status = 0
    print(f"{'backend':<8} {'ms':>8} {'baseline':>9} {'ratio':>6}")
    for name, ms in timings.items():
        ref = baseline.get(name)
        ratio = ms / ref if ref else math.nan
        flag = ""
        if ref and ratio > REGRESSION_FACTOR:
            flag = "  REGRESSION"
            status = 1
        print(f"{name:<8} {ms:8.1f} {ref if ref else float('nan'):9.1f} {ratio:6.2f}{flag}")
    if "cython" in timings and "python" in timings:
        print(f"speedup cython vs python: {timings['python'] / timings['cython']:.1f}x")
    default = timings[mapraster.get_backend()]
    print(f"default backend {mapraster.get_backend()}: {default:.1f} ms "
          f"({'within' if default <= BUDGET_MS else 'over'} the {BUDGET_MS:.0f} ms budget)")
    if args.update_baseline:
        BASELINE.write_text(json.dumps({k: round(v, 1) for k, v in timings.items()}, indent=2, sort_keys=True) + "\n")
        print(f"baseline written to {BASELINE}")
    return status


if __name__ == "__main__":
    sys.exit(main())
