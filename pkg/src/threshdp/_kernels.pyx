# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the inner loops of RecPrefix and its tests.

Each function mirrors one in ``_kernels_py`` and must return identical
results; ``threshdp.kernels`` picks whichever is importable.
"""
import numpy as np

from libc.stdint cimport int64_t, uint64_t

cdef extern from *:
    """
    static inline int threshdp_bitlen64(unsigned long long v) {
        return v ? 64 - __builtin_clzll(v) : 0;
    }
    """
    int threshdp_bitlen64(unsigned long long v) nogil


def pair_lcp(const uint64_t[:] a, const uint64_t[:] b, int width):
    """Leading-bit agreement of a[i] and b[i] as ``width``-bit strings."""
    cdef Py_ssize_t i, n = a.shape[0]
    if b.shape[0] != n:
        raise ValueError("length mismatch")
    out = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = width - threshdp_bitlen64(a[i] ^ b[i])
    return out


def prefix_runs(const uint64_t[:] sorted_values, int shift):
    """Distinct values of ``sorted_values >> shift`` and their multiplicities."""
    cdef Py_ssize_t i, j = 0, n = sorted_values.shape[0]
    prefixes = np.empty(n, dtype=np.uint64)
    counts = np.empty(n, dtype=np.int64)
    cdef uint64_t[::1] p = prefixes
    cdef int64_t[::1] c = counts
    cdef uint64_t cur
    if n == 0:
        return prefixes, counts
    with nogil:
        cur = sorted_values[0] >> shift
        p[0] = cur
        c[0] = 1
        for i in range(1, n):
            if (sorted_values[i] >> shift) == cur:
                c[j] += 1
            else:
                j += 1
                cur = sorted_values[i] >> shift
                p[j] = cur
                c[j] = 1
    return prefixes[: j + 1].copy(), counts[: j + 1].copy()


def count_close_pairs(const int64_t[:, :] perms, double radius):
    """Per row, count pairs (2i, 2i+1) whose entries differ by at most radius."""
    cdef Py_ssize_t t, i, rows = perms.shape[0], half = perms.shape[1] // 2
    out = np.zeros(rows, dtype=np.int64)
    cdef int64_t[::1] o = out
    cdef int64_t diff
    with nogil:
        for t in range(rows):
            for i in range(half):
                diff = perms[t, 2 * i] - perms[t, 2 * i + 1]
                if diff < 0:
                    diff = -diff
                if diff <= radius:
                    o[t] += 1
    return out
