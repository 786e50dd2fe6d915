#!/usr/bin/env python3
"""Times the compiled kernels against the NumPy fallback on media-path sizes.

Run: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from motionforge.kernels import _pykernels

try:
    from motionforge.kernels import _ckernels
except ImportError:
    _ckernels = None


def timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    mask = (rng.random((512, 512)) < 0.3).astype(np.uint8)
    frame_a = rng.integers(0, 256, (720, 1280, 3), dtype=np.uint8)
    frame_b = rng.integers(0, 256, (720, 1280, 3), dtype=np.uint8)
    depth = rng.random((512, 512))
    pts = np.argwhere(_pykernels.boundary(mask) > 0)[:1500]
    outer = np.argwhere(_pykernels.dilate(mask, 3) > 0)[::40][:1500]
    inner = np.argwhere(mask > 0)[::40][:1500]

    cases = [
        ("dilate 512x512 r3", lambda impl: impl.dilate(mask, 3)),
        ("erode 512x512 r3", lambda impl: impl.erode(mask, 3)),
        ("boundary 512x512", lambda impl: impl.boundary(mask)),
        ("mean_hsv_diff 720p", lambda impl: impl.mean_hsv_diff(frame_a, frame_b)),
        ("nearest_delta 1.5k pts", lambda impl: impl.nearest_depth_delta(
            pts, outer, inner, depth)),
    ]

    impls = [("numpy", _pykernels)]
    if _ckernels is not None:
        impls.append(("cython", _ckernels))

    width = max(len(name) for name, _ in cases)
    header = f"{'kernel'.ljust(width)}  " + "  ".join(f"{n:>10s}" for n, _ in impls)
    if len(impls) == 2:
        header += f"  {'speedup':>8s}"
    print(header)
    print("-" * len(header))
    for name, fn in cases:
        times = [timeit(lambda impl=impl: fn(impl), args.repeats) for _, impl in impls]
        row = f"{name.ljust(width)}  " + "  ".join(f"{t * 1e3:9.2f}ms" for t in times)
        if len(times) == 2:
            row += f"  {times[0] / times[1]:7.1f}x"
        print(row)


if __name__ == "__main__":
    main()
