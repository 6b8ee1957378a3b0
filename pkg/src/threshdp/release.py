"""Private release of all threshold queries, and CDF learning built on it.

A threshold query c_t counts the rows y <= t. Releases are ``StepCdf``
objects: answers are constant between breakpoints and 0 before the first.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .domain import Dataset, OrderedDomain
from .errors import DomainError, ParameterError, ProtocolError, SampleSizeError
from .interior_point import RecPrefixSolver, is_interior
from .primitives import RandomSource, laplace_noise


@dataclass(frozen=True)
class AccuracyParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (0 < self.alpha < 1 and 0 < self.beta < 1):
            raise ParameterError("alpha and beta must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class StepCdf:
    breakpoints: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        bp = np.asarray(self.breakpoints)
        if bp.dtype.kind in "iu":
            bp = bp.astype(np.uint64)
        vals = np.asarray(self.values, dtype=float)
        if bp.shape != vals.shape or bp.ndim != 1:
            raise ValueError("breakpoints and values must be 1-d and equal length")
        if bp.size > 1 and not np.all(bp[1:] > bp[:-1]):
            raise ValueError("breakpoints must be strictly increasing")
        if vals.size and (vals.min() < 0 or vals.max() > 1 or np.any(np.diff(vals) < 0)):
            raise ValueError("values must be non-decreasing within [0, 1]")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    def __call__(self, t):
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=self.breakpoints.dtype))
        idx = np.searchsorted(self.breakpoints, t, side="right") - 1
        out = np.where(idx >= 0, self.values[np.maximum(idx, 0)] if self.values.size else 0.0, 0.0)
        return float(out[0]) if scalar else out

    def rows(self):
        """(threshold, answer) pairs at every breakpoint."""
        return [(int(b), float(v)) for b, v in zip(self.breakpoints, self.values)]

    def __eq__(self, other):
        if not isinstance(other, StepCdf):
            return NotImplemented
        return (np.array_equal(self.breakpoints, other.breakpoints)
                and np.array_equal(self.values, other.values))

    __hash__ = None


def _sorted_rows(data) -> np.ndarray:
    if isinstance(data, Dataset):
        return data.sorted_rows
    return np.sort(np.asarray(data))


def empirical_cdf(data) -> StepCdf:
    """Exact fraction of rows <= t, as a StepCdf over the distinct values."""
    rows = _sorted_rows(data)
    if len(rows) == 0:
        return StepCdf(np.zeros(0, dtype=np.uint64), np.zeros(0))
    vals, first = np.unique(rows, return_index=True)
    ends = np.append(first[1:], len(rows))
    return StepCdf(vals, ends / len(rows))


def kolmogorov_distance(a: StepCdf, b: StepCdf) -> float:
    """sup_t |a(t) - b(t)|; both are constant between their breakpoints."""
    pts = np.union1d(a.breakpoints, b.breakpoints)
    if pts.size == 0:
        return 0.0
    return float(np.max(np.abs(a(pts) - b(pts))))


def max_threshold_error(release: StepCdf, data) -> float:
    return kolmogorov_distance(release, empirical_cdf(data))


def _project(values: np.ndarray) -> np.ndarray:
    return np.maximum.accumulate(np.clip(values, 0.0, 1.0))


# -- tree mechanism ---------------------------------------------------------

def tree_levels(k: int) -> int:
    return max(0, math.ceil(math.log2(k))) if k > 1 else 0


def tree_noise_scale(k: int, eps: float) -> float:
    # replacing one row moves two leaves, touching two nodes per level
    return 2 * tree_levels(k) / eps


def tree_error_bound(k: int, n: int, eps: float, beta: float) -> float:
    return 4 * math.log2(1 / beta) * math.log2(k) ** 2.5 / (eps * n)


def prefix_sums_from_tree(leaf_counts: np.ndarray, eps: float, rng: RandomSource | None,
                          noise: bool = True) -> np.ndarray:
    """Noisy #{rows in leaves 0..t} for every t via dyadic decomposition.

    The root and the last prefix are left exact since the number of rows
    is public.
    """
    k = len(leaf_counts)
    levels = tree_levels(k)
    width = 1 << levels
    leaves = np.zeros(width, dtype=np.int64)
    leaves[:k] = leaf_counts
    n = int(leaves.sum())
    ends = np.arange(1, k + 1, dtype=np.int64)
    total = np.zeros(k, dtype=float if noise else np.int64)
    full = ends == width
    scale = tree_noise_scale(k, eps) if noise else 0.0
    for lvl in range(1, levels + 1):
        span = width >> lvl
        nodes = leaves.reshape(1 << lvl, span).sum(axis=1)
        if noise:
            nodes = nodes + laplace_noise(scale, rng, nodes.size)
        use = ((ends >> (levels - lvl)) & 1).astype(bool) & ~full
        idx = (ends >> (levels - lvl)) - 1
        total[use] += nodes[idx[use]]
    total[full] = n
    total[-1] = n
    return total


def tree_release_counts(leaf_counts, eps: float, rng: RandomSource | None,
                        labels=None, noise: bool = True) -> StepCdf:
    counts = np.asarray(leaf_counts, dtype=np.int64)
    n = int(counts.sum())
    if n == 0:
        raise ParameterError("tree release needs at least one row")
    if noise and not eps > 0:
        raise ParameterError("eps must be positive")
    labels = np.arange(len(counts), dtype=np.uint64) if labels is None else labels
    sums = prefix_sums_from_tree(counts, eps, rng, noise)
    answers = sums / n
    return StepCdf(labels, _project(answers) if noise else answers,
                   {"K": len(counts), "levels": tree_levels(len(counts)),
                    "noise_scale": tree_noise_scale(len(counts), eps) if noise else 0.0})


def tree_release(data, k: int, eps: float, rng: RandomSource, noise: bool = True) -> StepCdf:
    """eps-DP answers to every threshold over the universe {0, ..., k-1}."""
    if k < 1:
        raise ParameterError("universe size must be >= 1")
    rows = data.rows if isinstance(data, Dataset) else np.asarray(data)
    rows = rows.astype(np.int64)
    if rows.size and (rows.min() < 0 or rows.max() >= k):
        raise DomainError(f"rows must lie in [0, {k})")
    return tree_release_counts(np.bincount(rows, minlength=k), eps, rng, noise=noise)


# -- Thresh -----------------------------------------------------------------

def _blocks_for(alpha: float, factor: float) -> int:
    return math.ceil(factor / alpha - 1e-9)


def thresh_sample_size(alpha: float, beta: float, eps: float, m: int) -> int:
    k = _blocks_for(alpha, 6)
    a = 6 / k
    return math.ceil(max(6 * m / a,
                         25 * math.log2(24 / beta) * math.log2(6 / a) ** 2.5 / (a * eps)))


def thresh2_blocks(alpha: float) -> int:
    return 1 << max(1, math.ceil(math.log2(3 / alpha - 1e-9)))


def thresh2_sample_size(alpha: float, beta: float, eps: float, m: int) -> int:
    a = 3 / thresh2_blocks(alpha)
    return math.ceil(max(6 * m / a, 99 * math.log2(1 / a) ** 2.5 / (a * eps)))


def fixed_size_block(rows: np.ndarray, m: int, fill) -> np.ndarray:
    """First m rows, padded with ``fill`` when there are fewer."""
    if len(rows) >= m:
        return rows[:m]
    pad = np.full(m - len(rows), fill, dtype=rows.dtype)
    return np.concatenate([rows, pad])


def _clamped_boundaries(raw: np.ndarray, n: int, start: int = 0) -> np.ndarray:
    out = np.empty(len(raw), dtype=np.int64)
    prev = start
    for i, t in enumerate(np.rint(raw)):
        prev = int(min(max(t, prev), n))
        out[i] = prev
    return out


def _default_solver(domain, beta, eps, delta, unsafe):
    return RecPrefixSolver(domain, beta, eps, delta, unsafe_utility=unsafe)


def thresh_release(data: Dataset, acc: AccuracyParams, eps: float, delta: float,
                   rng: RandomSource, *, solver=None, ipp_m: int | None = None,
                   unsafe_utility: bool = False, diagnostics: bool = False) -> StepCdf:
    """(5 eps, (1 + e^eps) delta)-DP release of every threshold query.

    Sorted rows are cut into about 6/alpha blocks of noisy size alpha*n/3.
    Each block contributes one interior point as a representative. The
    tree mechanism then answers thresholds at the representatives, and
    other thresholds take the answer of the nearest representative below.

    ``diagnostics=True`` records four per-run utility events in ``meta``.
    They are computed from the raw data and are not private.
    """
    domain = data.domain
    rows = data.sorted_rows
    n = len(rows)
    k = _blocks_for(acc.alpha, 6)
    alpha = 6 / k
    if solver is None:
        solver = _default_solver(domain, alpha * acc.beta / 24, eps, delta, unsafe_utility)
    if ipp_m is None:
        ipp_m = solver.sample_size if not unsafe_utility else max(1, int(alpha * n / 3))
    need = thresh_sample_size(alpha, acc.beta, eps, ipp_m)
    if n < need and not unsafe_utility:
        raise SampleSizeError(f"Thresh needs n >= {need} rows, got {n}")

    block = alpha * n / 3
    raw = np.cumsum(block + laplace_noise(1 / eps, rng, k))
    bounds = _clamped_boundaries(raw, n)
    starts = np.concatenate(([0], bounds[:-1]))
    top = domain.max_element
    reps, fed_ok = [], []
    for lo, hi in zip(starts, bounds):
        fed = fixed_size_block(rows[lo:hi], ipp_m, top)
        r = solver(fed, rng, presorted=True)
        reps.append(r)
        if diagnostics:
            fed_ok.append(is_interior(r, fed))

    universe = np.unique(np.array([domain.min_element] + reps, dtype=rows.dtype))
    # D-hat: every row moves down to the largest representative below it
    cuts = np.searchsorted(rows, universe, side="left")
    leaf_counts = np.diff(np.append(cuts, n))
    tree = tree_release_counts(leaf_counts, eps, rng, labels=universe)

    meta = {"alpha_effective": alpha, "blocks": k, "ipp_m": ipp_m,
            "representatives": [int(r) for r in reps]}
    if diagnostics:
        exact = np.cumsum(leaf_counts) / n
        sizes = np.diff(np.concatenate(([0], bounds)))
        meta.update({
            "exhausted": bool(np.rint(raw[-1]) >= n),
            "solver_success": bool(all(fed_ok)),
            "max_block_size": int(sizes.max()),
            "block_size_ok": bool(sizes.max() <= 5 * alpha * n / 12),
            "tree_error": float(np.max(np.abs(tree.values - exact))),
            "tree_ok": bool(np.max(np.abs(tree.values - exact)) <= alpha / 6),
        })
    return StepCdf(tree.breakpoints, tree.values, meta)


def _dyadic_noise(k: int, scale: float, rng: RandomSource) -> np.ndarray:
    """eta_i = sum of node noise on the root-to-leaf path of leaf i."""
    levels = int(math.log2(k))
    eta = np.zeros(k)
    leaf = np.arange(k)
    for lvl in range(levels + 1):
        nodes = laplace_noise(scale, rng, 1 << lvl)
        eta += nodes[leaf >> (levels - lvl)]
    return eta


def thresh2_noise_scale(k: int, eps: float) -> float:
    # a neighbouring input shifts a range of leaves: <= 2 log k nodes move by 1
    return 2 * math.log2(k) / eps


def thresh2_quantiles(data: Dataset, acc: AccuracyParams, eps: float, delta: float,
                      rng: RandomSource, *, solver=None, ipp_m: int | None = None,
                      unsafe_utility: bool = False, return_meta: bool = False):
    """(3 eps, (1 + e^eps) delta)-DP approximate (alpha/3)-quantiles.

    The i-th output (i = 1..k-1) estimates the row at rank i*alpha*n/3,
    where k = 3/alpha is rounded up to a power of two.
    """
    domain = data.domain
    rows = data.sorted_rows
    n = len(rows)
    k = thresh2_blocks(acc.alpha)
    alpha = 3 / k
    if solver is None:
        solver = _default_solver(domain, alpha * acc.beta / 6, eps, delta, unsafe_utility)
    if ipp_m is None:
        ipp_m = solver.sample_size if not unsafe_utility else max(1, int(alpha * n / 6))
    need = thresh2_sample_size(alpha, acc.beta, eps, ipp_m)
    if n < need and not unsafe_utility:
        raise SampleSizeError(f"Thresh2 needs n >= {need} rows, got {n}")

    eta = _dyadic_noise(k, thresh2_noise_scale(k, eps), rng)
    i = np.arange(k)
    raw = alpha * n / 6 + i * alpha * n / 3 + eta
    raw[0] = alpha * n / 6
    raw[k - 1] = n - alpha * n / 6
    bounds = _clamped_boundaries(raw, n)
    quantiles = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        fed = fixed_size_block(rows[lo:hi], ipp_m, domain.max_element)
        quantiles.append(int(solver(fed, rng, presorted=True)))
    if return_meta:
        return quantiles, {"alpha_effective": alpha, "blocks": k, "eta": eta[1 : k - 1],
                           "ipp_m": ipp_m}
    return quantiles


def quantiles_to_cdf(quantiles, alpha: float, domain: OrderedDomain, meta=None) -> StepCdf:
    """Threshold answers from approximate (alpha/3)-quantiles."""
    q = sorted(int(x) for x in quantiles)
    levels = [(i + 1) * alpha / 3 for i in range(len(q))]
    bps, vals = [], []
    for x, v in zip(q, levels):
        if bps and bps[-1] == x:
            vals[-1] = v
        else:
            bps.append(x)
            vals.append(v)
    return StepCdf(domain.as_array(bps), _project(np.array(vals)), dict(meta or {}))


def thresh2_release(data: Dataset, acc: AccuracyParams, eps: float, delta: float,
                    rng: RandomSource, **kw) -> StepCdf:
    quantiles, meta = thresh2_quantiles(data, acc, eps, delta, rng, return_meta=True, **kw)
    meta = {k: v for k, v in meta.items() if k != "eta"}
    return quantiles_to_cdf(quantiles, meta["alpha_effective"], data.domain, meta)


# -- reductions -------------------------------------------------------------

def pad_with_extremes(rows, total: int, domain: OrderedDomain) -> np.ndarray:
    """Pad to ``total`` rows with (nearly) equal numbers of min X and max X."""
    rows = domain.as_array(rows)
    extra = total - len(rows)
    if extra < 0:
        raise ParameterError(f"cannot pad {len(rows)} rows down to {total}")
    lo = np.full(extra // 2, domain.min_element, dtype=rows.dtype)
    hi = np.full(extra - extra // 2, domain.max_element, dtype=rows.dtype)
    return np.concatenate([lo, rows, hi])


def interior_point_from_release(release: Callable[[Dataset, RandomSource], StepCdf],
                                release_size: int, data: Dataset, rng: RandomSource) -> int:
    """Interior point from any accurate threshold release on release_size rows.

    The input is padded with min X and max X up to ``release_size`` (the
    release's n/(8 alpha)). The answer is the smallest threshold whose
    released answer reaches 1/2.
    """
    if len(data) == 0:
        raise ParameterError("interior point of an empty dataset is undefined")
    padded = Dataset(data.domain, pad_with_extremes(data.rows, release_size, data.domain))
    cdf = release(padded, rng)
    hit = np.flatnonzero(cdf.values >= 0.5)
    if hit.size == 0:
        raise ProtocolError("no released threshold answer reaches 1/2")
    return int(cdf.breakpoints[hit[0]])


def learn_sample_size(alpha: float, beta: float, eps: float, m: int) -> int:
    return max(thresh_sample_size(alpha, beta, eps, m), math.ceil(2 * math.log(2 / beta) / alpha**2))


def project_cdf(cdf: StepCdf, domain: OrderedDomain) -> StepCdf:
    """Clamp, make monotone and end at 1 on max X."""
    bps = list(cdf.breakpoints)
    vals = list(_project(cdf.values))
    if bps and int(bps[-1]) == domain.max_element:
        vals[-1] = 1.0
    else:
        bps.append(domain.max_element)
        vals.append(1.0)
    return StepCdf(domain.as_array(bps), np.array(vals), dict(cdf.meta))


def learn_distribution(samples: Dataset, acc: AccuracyParams, eps: float, delta: float,
                       rng: RandomSource, *, unsafe_utility: bool = False, **kw) -> StepCdf:
    """CDF estimate within Kolmogorov distance 2 alpha w.p. >= 1 - 2 beta."""
    n = len(samples)
    dkw = math.ceil(2 * math.log(2 / acc.beta) / acc.alpha**2)
    if n < dkw and not unsafe_utility:
        raise SampleSizeError(f"learning needs n >= {dkw} samples, got {n}")
    released = thresh_release(samples, acc, eps, delta, rng, unsafe_utility=unsafe_utility, **kw)
    return project_cdf(released, samples.domain)


def release_from_learner(learner: Callable[[Dataset, RandomSource], StepCdf], learner_size: int,
                         data: Dataset, rng: RandomSource) -> StepCdf:
    """Threshold release for a fixed dataset of size >= 9 * learner_size.

    Draws learner_size rows with replacement and answers from the learned CDF.
    """
    if len(data) < 9 * learner_size:
        raise SampleSizeError(f"need at least {9 * learner_size} rows, got {len(data)}")
    idx = rng.integers(0, len(data), size=learner_size)
    return learner(Dataset(data.domain, data.rows[idx]), rng)
