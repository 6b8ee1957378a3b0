"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--size N] [--repeat R]

Both backends are imported directly, so the comparison does not depend on
THRESHDP_PURE_PYTHON. Outputs are checked for equality before timing.
"""
import argparse
import timeit

import numpy as np

from threshdp import _kernels_py as py

try:
    from threshdp import _kernels as cy
except ImportError:
    cy = None


def cases(size, rng):
    a = rng.integers(0, 2**63, size=size, dtype=np.uint64)
    b = a ^ (np.uint64(1) << rng.integers(0, 63, size=size, dtype=np.uint64))
    sorted_vals = np.sort(rng.integers(0, 2**32, size=size, dtype=np.uint64))
    perms = rng.permuted(np.tile(np.arange(1, 1001, dtype=np.int64), (max(1, size // 1000), 1)), axis=1)
    return {
        "pair_lcp": lambda m: m.pair_lcp(a, b, 64),
        "prefix_runs": lambda m: m.prefix_runs(sorted_vals, 16),
        "count_close_pairs": lambda m: m.count_close_pairs(perms, 1),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, fn in cases(args.size, rng).items():
        t_py = min(timeit.repeat(lambda: fn(py), number=1, repeat=args.repeat)) * 1e3
        if cy is None:
            print(f"{name:<20}{t_py:>12.2f}{'n/a':>12}{'':>10}")
            continue
        ref, got = fn(py), fn(cy)
        ref, got = (ref, got) if isinstance(ref, tuple) else ((ref,), (got,))
        assert all(np.array_equal(r, g) for r, g in zip(ref, got)), name
        t_cy = min(timeit.repeat(lambda: fn(cy), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<20}{t_py:>12.2f}{t_cy:>12.2f}{t_py / t_cy:>9.1f}x")


if __name__ == "__main__":
    main()
