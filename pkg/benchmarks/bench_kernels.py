#!/usr/bin/env python3
"""Benchmark the compiled kernel extension against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--repeats N]

Times each hot kernel on representative sizes for both backends and prints a
speedup table.  The compiled backend must have been built (pip install does
this); otherwise only the fallback column is reported.
"""

import argparse
import time

import numpy as np

from fwrde._kernels import _pyfallback

try:
    from fwrde._kernels import _core
except ImportError:
    _core = None


def time_call(fn, *args, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def benchmark_cases(rng):
    top_k_small = (rng.standard_normal(10_000), 100)
    top_k_large = (rng.standard_normal(200_000), 400)
    neg_k = (rng.standard_normal(200_000), 400)
    hungarian_64 = (rng.standard_normal((64, 64)),)
    hungarian_192 = (rng.standard_normal((192, 192)),)
    moments = (rng.standard_normal(100_000), np.abs(rng.standard_normal(100_000)) + 0.01)
    return [
        ("top_k_abs n=1e4 k=100", "top_k_abs", top_k_small),
        ("top_k_abs n=2e5 k=400", "top_k_abs", top_k_large),
        ("most_negative_k n=2e5", "most_negative_k", neg_k),
        ("hungarian n=64", "hungarian", hungarian_64),
        ("hungarian n=192", "hungarian", hungarian_192),
        ("relu_moments n=1e5", "relu_moments", moments),
        ("relu_moment_partials n=1e5", "relu_moment_partials", moments),
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    cases = benchmark_cases(rng)

    header = f"{'kernel':<30} {'python':>12} {'compiled':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for label, name, call_args in cases:
        py = time_call(getattr(_pyfallback, name), *call_args, repeats=args.repeats)
        if _core is not None:
            cc = time_call(getattr(_core, name), *call_args, repeats=args.repeats)
            print(f"{label:<30} {py * 1e3:>10.2f}ms {cc * 1e3:>10.2f}ms {py / cc:>8.1f}x")
        else:
            print(f"{label:<30} {py * 1e3:>10.2f}ms {'n/a':>12} {'n/a':>9}")

    if _core is not None:
        # consistency spot check between the backends
        values = rng.standard_normal(5000)
        assert np.array_equal(_core.top_k_abs(values, 64), _pyfallback.top_k_abs(values, 64))
        cost = rng.standard_normal((40, 40))
        assert np.array_equal(_core.hungarian(cost), _pyfallback.hungarian(cost))
        print("\nbackends agree on spot checks")


if __name__ == "__main__":
    main()
