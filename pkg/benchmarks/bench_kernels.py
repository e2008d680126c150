"""Compiled vs pure-Python kernel timings.

    python3 benchmarks/bench_kernels.py [--repeat N] [--json PATH]

Each kernel runs on fixed inputs under both backends; the table reports the
best-of-N per-call time and the speedup. The tracker row times a full SORT
pass over 30 s of emulated detections.
"""

from __future__ import annotations

import argparse
import json
import sys
import timeit

import numpy as np

from intersection_edge import detemu, kernels
from intersection_edge.scenesim.camera import Camera, project_frame
from intersection_edge.scenesim.generate import SceneConfig, generate
from intersection_edge.tracker import Tracker, TrackerConfig


def _boxes(rng, n, side=832.0):
    xy = rng.uniform(0, side - 60, (n, 2))
    wh = rng.uniform(8, 60, (n, 2))
    return np.hstack([xy, xy + wh])


def cases(rng):
    a, b = _boxes(rng, 50), _boxes(rng, 60)
    img = rng.integers(0, 256, (832, 832), dtype=np.uint8)
    dst = img.copy()
    rects = np.round(_boxes(rng, 40)).astype(np.int64)
    target = (100, 100, 400, 380)
    mean, cov = rng.normal(size=7), np.eye(7) * 4.0
    F, Q = np.eye(7), np.eye(7) * 0.01
    H, R = np.eye(4, 7), np.eye(4)
    z = rng.normal(size=4)
    return {
        "iou_matrix 50x60": lambda: kernels.iou_matrix(a, b),
        "blur_region 64x64 k15": lambda: kernels.blur_region(img, dst, 200, 200, 264, 264, 15),
        "union_coverage 40 rects": lambda: kernels.union_coverage(target, rects),
        "kf_predict": lambda: kernels.kf_predict(mean, cov, F, Q),
        "kf_update": lambda: kernels.kf_update(mean, cov, z, H, R),
    }


def tracker_case():
    scene = generate(SceneConfig(duration=30.0, seed=3))
    cam = Camera()
    h = cam.world_to_crop()
    dims = cam.crop_dims
    noise = detemu.NoiseProfile()
    dets = []
    for f, fr in enumerate(scene.frames):
        ids, boxes, cls = project_frame(fr, h, dims)
        rows = [(int(i), tuple(map(float, bx)), int(c)) for i, bx, c in zip(ids, boxes, cls)]
        dets.append(detemu.emulate(rows, noise, 3, f, dims))
    from intersection_edge.geometry import calibrate

    px_to_world = calibrate(cam.calibration_points())

    def run():
        tr = Tracker(TrackerConfig(), px_to_world, 30.0)
        for f, d in enumerate(dets):
            tr.step(f, d)

    return run


def best(fn, repeat: int) -> float:
    t = timeit.Timer(fn)
    n, _ = t.autorange()
    return min(t.repeat(repeat, n)) / n


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", metavar="PATH", help="also write the results as JSON")
    ap.add_argument("--no-tracker", action="store_true", help="skip the end-to-end tracker row")
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled kernels are not built; timing the python backend only", file=sys.stderr)
    fns = cases(np.random.default_rng(0))
    if not args.no_tracker:
        fns["tracker 30 s scene"] = tracker_case()
    results = {}
    for name, fn in fns.items():
        row = {}
        for be in backends:
            kernels.use_backend(be)
            row[be] = best(fn, args.repeat if not name.startswith("tracker") else 1)
        results[name] = row
    kernels.use_backend(backends[0])

    print(f"{'kernel':28s}" + "".join(f"{b:>14s}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for name, row in results.items():
        cells = "".join(f"{row[b] * 1e6:12.1f}us" for b in backends)
        sp = f"{row['python'] / row['compiled']:11.1f}x" if len(backends) > 1 else ""
        print(f"{name:28s}{cells}{sp}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
