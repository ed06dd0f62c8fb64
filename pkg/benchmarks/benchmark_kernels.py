#!/usr/bin/env python3
"""Benchmark the numba-jitted raster kernels against the pure NumPy fallbacks.

Runs each kernel pair on synthetic masks/contours of increasing size, checks
that both paths produce identical results, and prints a timing table.

Usage:
    python benchmarks/benchmark_kernels.py
    python benchmarks/benchmark_kernels.py --sizes 128 256 512 --repeats 5
    python benchmarks/benchmark_kernels.py --output results.json
"""

import argparse
import json
import time

import numpy as np

from runway_toolkit import kernels


def make_mask(size, rng):
    """Rectangle with a ragged boundary, roughly half the frame."""
    m = np.zeros((size, size), dtype=np.uint8)
    lo, hi = size // 4, 3 * size // 4
    m[lo:hi, lo:hi] = 1
    edge = rng.integers(-2, 3, hi - lo)
    for i, off in enumerate(edge):
        m[lo + i, max(0, lo + off):hi] = 1
    return m


def make_contour(n, rng):
    t = np.sort(rng.uniform(0, 2 * np.pi, n))
    r = 40 * (1 + 0.3 * np.sin(5 * t)) + rng.normal(0, 1.5, n)
    return np.column_stack([100 + r * np.cos(t), 100 + r * np.sin(t)])


def timeit(func, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        result = func()
        best = min(best, time.perf_counter() - start)
    return best, result


def bench_morphology(size, repeats, rng):
    m = make_mask(size, rng)
    t_jit, out_jit = timeit(lambda: kernels.dilate_jit(kernels.erode_jit(m, 3), 3),
                            repeats)
    t_py, out_py = timeit(lambda: kernels.dilate_py(kernels.erode_py(m, 3), 3),
                          repeats)
    assert np.array_equal(out_jit, out_py)
    return t_jit, t_py


def bench_label_trace(size, repeats, rng):
    m = make_mask(size, rng)

    def run(label, trace):
        labels, count = label(m)
        paths = []
        flat = labels.ravel()
        order = np.argsort(flat, kind="stable")
        uniq, first = np.unique(flat[order], return_index=True)
        starts = {int(u): int(order[f]) for u, f in zip(uniq, first)}
        for lid in range(1, count + 1):
            s = starts[lid]
            paths.append(trace(labels, lid, s // size, s % size))
        return paths

    t_jit, out_jit = timeit(lambda: run(kernels.label_jit, kernels.trace_jit),
                            repeats)
    t_py, out_py = timeit(lambda: run(kernels.label_py, kernels.trace_py),
                          repeats)
    assert all(np.array_equal(a, b) for a, b in zip(out_jit, out_py))
    return t_jit, t_py


def bench_fill(size, repeats, rng):
    poly = make_contour(max(64, size // 4), rng) * (size / 200.0)
    xa = np.ascontiguousarray(poly[:, 0])
    ya = np.ascontiguousarray(poly[:, 1])
    xb = np.ascontiguousarray(np.roll(poly[:, 0], -1))
    yb = np.ascontiguousarray(np.roll(poly[:, 1], -1))

    def run(fill):
        out = np.zeros((size, size), dtype=np.uint8)
        fill(xa, ya, xb, yb, 0.0, 0.0, size, size, out)
        return out

    t_jit, out_jit = timeit(lambda: run(kernels.fill_jit), repeats)
    t_py, out_py = timeit(lambda: run(kernels.fill_py), repeats)
    assert np.array_equal(out_jit, out_py)
    return t_jit, t_py


def bench_dp(size, repeats, rng):
    pts = make_contour(size * 8, rng)
    t_jit, out_jit = timeit(lambda: kernels.dp_jit(pts, 1.0), repeats)
    t_py, out_py = timeit(lambda: kernels.dp_py(pts, 1.0), repeats)
    assert np.array_equal(out_jit, out_py)
    return t_jit, t_py


BENCHES = [
    ("open 3x3", bench_morphology),
    ("label+trace", bench_label_trace),
    ("scanline fill", bench_fill),
    ("douglas-peucker", bench_dp),
]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[128, 256, 512, 1024])
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--output", default=None, help="write results as JSON")
    args = parser.parse_args()

    if not kernels.NUMBA_AVAILABLE:
        print("numba is not installed; jit timings will equal the pure path")
    kernels.warm_up()

    rng = np.random.default_rng(0)
    rows = []
    print(f"{'kernel':<18}{'size':>6}{'jit (ms)':>12}{'pure (ms)':>12}{'speedup':>10}")
    print("-" * 58)
    for name, bench in BENCHES:
        for size in args.sizes:
            t_jit, t_py = bench(size, args.repeats, rng)
            speedup = t_py / t_jit if t_jit > 0 else float("inf")
            print(f"{name:<18}{size:>6}{t_jit * 1e3:>12.2f}{t_py * 1e3:>12.2f}"
                  f"{speedup:>9.1f}x")
            rows.append({"kernel": name, "size": size,
                         "jit_ms": t_jit * 1e3, "pure_ms": t_py * 1e3,
                         "speedup": speedup})
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            json.dump({"numba_available": kernels.NUMBA_AVAILABLE,
                       "results": rows}, fh, indent=1)
        print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
