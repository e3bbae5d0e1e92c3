#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Runs both implementations of the single-profile and batched accumulators
over a grid of shapes and prints a timing table. The numba path is warmed
up first so compilation is not billed to the measurements.

Usage: python3 benchmarks/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from zinorm import _kernels


def _sample_cells(rng, shape):
    n = rng.integers(50, 500, size=shape).astype(np.float64)
    a = np.floor(n * rng.uniform(0.01, 0.3, size=shape))
    b = np.maximum(n - a, 1.0)
    c = a + np.floor((n - a) * rng.uniform(0.0, 0.5, size=shape))
    d = b + n
    return a, b, c, d


def _time(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    if not _kernels.HAS_NUMBA:
        raise SystemExit("numba is not importable; nothing to compare")

    rng = np.random.default_rng(123)
    print(f"{'kernel':<14} {'shape':>16} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    print("-" * 64)

    for strata in (100, 10_000, 1_000_000):
        cells = _sample_cells(rng, strata)
        _kernels.mh_accumulate_numba(*cells)  # warmup/compile
        t_np = _time(_kernels.mh_accumulate_numpy, cells, args.repeats)
        t_nb = _time(_kernels.mh_accumulate_numba, cells, args.repeats)
        print(
            f"{'mh_accumulate':<14} {f'({strata},)':>16} "
            f"{t_np * 1e3:9.3f}ms {t_nb * 1e3:9.3f}ms {t_np / t_nb:7.1f}x"
        )

    for shape in ((2_000, 10), (2_000, 500), (20_000, 500)):
        cells = _sample_cells(rng, shape)
        _kernels.mh_batch_numba(*cells)  # warmup/compile
        t_np = _time(_kernels.mh_batch_numpy, cells, args.repeats)
        t_nb = _time(_kernels.mh_batch_numba, cells, args.repeats)
        print(
            f"{'mh_batch':<14} {str(shape):>16} "
            f"{t_np * 1e3:9.3f}ms {t_nb * 1e3:9.3f}ms {t_np / t_nb:7.1f}x"
        )


if __name__ == "__main__":
    main()
