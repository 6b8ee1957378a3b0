"""Kernel backend selected at import.

The compiled extension is used when it was built; setting
``THRESHDP_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

BACKEND = "python"

if not os.environ.get("THRESHDP_PURE_PYTHON"):
    try:
        from ._kernels import count_close_pairs, pair_lcp, prefix_runs

        BACKEND = "cython"
    except ImportError:
        pass

if BACKEND == "python":
    from ._kernels_py import count_close_pairs, pair_lcp, prefix_runs

__all__ = ["BACKEND", "count_close_pairs", "pair_lcp", "prefix_runs"]
