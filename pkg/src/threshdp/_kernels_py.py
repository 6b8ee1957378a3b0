"""Numpy implementations of the kernels in ``_kernels.pyx``."""
import numpy as np

_STEPS = (32, 16, 8, 4, 2, 1)


def _bit_length(v):
    v = v.copy()
    out = np.zeros(v.shape, dtype=np.int64)
    for s in _STEPS:
        hi = v >= (np.uint64(1) << np.uint64(s))
        out[hi] += s
        v[hi] >>= np.uint64(s)
    out += v > 0
    return out


def pair_lcp(a, b, width):
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    if a.shape != b.shape:
        raise ValueError("length mismatch")
    return width - _bit_length(a ^ b)


def prefix_runs(sorted_values, shift):
    v = np.asarray(sorted_values, dtype=np.uint64) >> np.uint64(shift)
    if v.size == 0:
        return v.copy(), np.zeros(0, dtype=np.int64)
    starts = np.flatnonzero(np.diff(v)) + 1
    starts = np.concatenate(([0], starts))
    counts = np.diff(np.append(starts, v.size)).astype(np.int64)
    return v[starts], counts


def count_close_pairs(perms, radius):
    perms = np.asarray(perms, dtype=np.int64)
    half = perms.shape[1] // 2
    diff = np.abs(perms[:, 0 : 2 * half : 2] - perms[:, 1 : 2 * half : 2])
    return (diff <= radius).sum(axis=1).astype(np.int64)
