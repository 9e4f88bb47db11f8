#!/usr/bin/env python3
"""Benchmark the numba kernel lane against the pure-numpy fallback lane.

Runs each hot kernel on representative inputs and prints a speedup table.
The numpy lane is the one selected by LICHENMETER_NUMBA=0.

Usage: python benchmarks/bench_kernels.py [--repeats 3]
"""

import argparse
import time

import numpy as np

from lichenmeter import backend
from lichenmeter.features import FeatureConfig, extract_features
from lichenmeter.grabcut import GrabcutParams, build_graph, fit_gmms, init_trimap
from lichenmeter.maxflow import grid_maxflow
from lichenmeter.rectify import warp_array
from lichenmeter.regions import label_same_value_components
from lichenmeter.slic import SlicParams, slic
from lichenmeter.svm import SvmParams, smo_state
from lichenmeter.synthcorpus import difficulty_spec, generate


def timeit(fn, repeats):
    fn()  # warm-up (includes JIT compilation for the numba lane)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    if not backend.HAVE_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    print(f"numba available: {backend.HAVE_NUMBA}; "
          f"default lane here: {'numba' if backend.USE_NUMBA else 'numpy'}")

    scene = generate(difficulty_spec(0, "medium"))  # 480x360 scene
    img = scene.image
    rows = []

    # bilinear warp: 1850x2720 output (the rectified-photo shape)
    src = img.as_float()
    h = np.array([[0.9, 0.05, 10.0], [-0.04, 0.95, 6.0], [2e-5, 1e-5, 1.0]])
    for lane in ("numba", "numpy"):
        t = timeit(lambda: warp_array(src, h, 720, 1080, force_lane=lane),
                   args.repeats)
        rows.append(("warp_bilinear 1080x720x3", lane, t))

    # SLIC: 1000 superpixels on the 480x360 scene
    for lane in ("numba", "numpy"):
        t = timeit(lambda: slic(img, SlicParams(1000, 10.0, 1.0),
                                force_lane=lane), args.repeats)
        rows.append(("slic n=1000 480x360", lane, t))

    # per-segment histograms
    spx = slic(img, SlicParams(1000, 10.0, 1.0))
    for lane in ("numba", "numpy"):
        t = timeit(lambda: extract_features(img, spx, FeatureConfig(),
                                            force_lane=lane), args.repeats)
        rows.append(("histograms 96-dim x1000", lane, t))

    # component labeling on the superpixel map
    for lane in ("numba", "numpy"):
        t = timeit(
            lambda: label_same_value_components(spx.labels, 4, force_lane=lane),
            args.repeats,
        )
        rows.append(("components 480x360", lane, t))

    # grid max-flow on a real segmentation graph
    tri = init_trimap(img, (8, 8, img.width - 16, img.height - 16))
    fg, bg = fit_gmms(img, tri, GrabcutParams())
    nbr, term, _ = build_graph(img.as_float(), tri, fg, bg, 50.0)
    for lane in ("numba", "numpy"):
        t = timeit(
            lambda: grid_maxflow(nbr.copy(), term.copy(), img.height, img.width,
                                 force_lane=lane),
            args.repeats,
        )
        rows.append(("maxflow 480x360 grid", lane, t))

    # SMO on a 1500-row RBF problem
    rng = np.random.default_rng(0)
    x = np.vstack([rng.normal(0, 1, (750, 32)), rng.normal(0.7, 1, (750, 32))])
    lab = np.repeat([0, 1], 750)
    params = SvmParams(c=1.0, kernel="rbf")
    for lane in ("numba", "numpy"):
        t = timeit(lambda: smo_state(x, lab, params, force_lane=lane),
                   args.repeats)
        rows.append(("smo rbf n=1500", lane, t))

    print()
    print(f"{'kernel':<28} {'numba':>10} {'numpy':>10} {'speedup':>9}")
    by_kernel = {}
    for name, lane, t in rows:
        by_kernel.setdefault(name, {})[lane] = t
    for name, lanes in by_kernel.items():
        ratio = lanes["numpy"] / lanes["numba"]
        print(f"{name:<28} {lanes['numba'] * 1e3:>8.1f}ms "
              f"{lanes['numpy'] * 1e3:>8.1f}ms {ratio:>8.1f}x")


if __name__ == "__main__":
    main()
