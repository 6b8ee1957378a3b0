"""RecPrefix: a private interior-point solver and its sample-size calculator.

Given rows x_1..x_n, return a point between min and max. Each level pairs
randomly permuted rows and recurses on their common-prefix lengths. That
length z then guides a choosing-mechanism pick of a (z+1)-bit prefix that
many rows share.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .domain import Dataset, OrderedDomain, lcp_lengths, recursion_depth
from .errors import ParameterError, SampleSizeError
from .primitives import (PrivacyBudget, RandomSource, check_choosing_params,
                         choose_from_support, exponential_from_scores, sample_laplace)

K_CONSTANT = 386
SIZE_CONSTANT = 18500
DATABASE_SIZE_CONSTANT = 2312
LEVEL_SIZE_CONSTANT = 1540


@dataclass(frozen=True)
class RecPrefixParams:
    """Parameters handed to every level; k is the per-level margin."""

    beta: float
    eps: float
    delta: float

    @property
    def k(self) -> int:
        return level_k(self.beta, self.eps, self.delta)


def level_k(beta: float, eps: float, delta: float) -> int:
    return math.floor((K_CONSTANT / eps) * math.log(4 / (beta * eps * delta)))


def _check_params(beta, eps, delta):
    if not (0 < beta <= 1 and 0 < delta <= 1 and eps > 0):
        raise ParameterError("need 0 < beta, delta <= 1 and eps > 0")


def level_params(domain: OrderedDomain, beta: float, eps: float, delta: float) -> RecPrefixParams:
    """Split the overall (beta, eps, delta) evenly across the levels."""
    _check_params(beta, eps, delta)
    n = recursion_depth(domain)
    return RecPrefixParams(beta / (3 * n), eps / (2 * n), delta / (2 * n))


def required_sample_size(domain: OrderedDomain, beta: float, eps: float, delta: float) -> int:
    _check_params(beta, eps, delta)
    n = recursion_depth(domain)
    return math.ceil((SIZE_CONSTANT / eps) * 2**n * n * math.log(4 * n / (beta * eps * delta)))


@dataclass
class RecPrefixRun:
    value: int
    params: RecPrefixParams
    depth: int = 0
    level_sizes: list = field(default_factory=list)
    level_ks: list = field(default_factory=list)
    prefix_lengths: list = field(default_factory=list)
    fallbacks: int = 0


def _base_case(rows, domain, eps, rng):
    cand = np.arange(domain.size, dtype=np.uint64)
    n = len(rows)
    le = np.searchsorted(rows, cand, side="right")
    ge = n - np.searchsorted(rows, cand, side="left")
    return exponential_from_scores(np.minimum(le, ge), eps, 1.0, rng)


def _prefix_counts(rows, shift, domain):
    if domain.machine:
        return kernels.prefix_runs(rows, shift)
    groups = [(p, sum(1 for _ in g)) for p, g in itertools.groupby(int(v) >> shift for v in rows)]
    prefixes = np.empty(len(groups), dtype=object)
    prefixes[:] = [p for p, _ in groups]
    return prefixes, np.array([c for _, c in groups], dtype=np.int64)


def _elem(domain, x):
    return np.uint64(x) if domain.machine else x


def _level(rows, domain: OrderedDomain, p: RecPrefixParams, rng: RandomSource,
           run: RecPrefixRun) -> int:
    """One RecPrefix call on ascending ``rows``."""
    n = len(rows)
    run.depth += 1
    run.level_sizes.append(n)
    if domain.size <= domain.base_case_threshold:
        return _base_case(rows, domain, p.eps, rng)

    k = p.k
    run.level_ks.append(k)
    m = max(n - 2 * k, 0)
    y = rows[:m][rng.permutation(m)]
    half = m // 2
    z_rows = lcp_lengths(y[0 : 2 * half : 2], y[1 : 2 * half : 2], domain)
    child = domain.child()
    # lcp lengths are at most d, so a counting sort orders them
    tally = np.bincount(z_rows, minlength=1)
    z_sorted = np.repeat(np.arange(len(tally), dtype=np.uint64), tally)
    z = _level(z_sorted, child, p, rng, run)
    # a long z only says many pairs are equal; a full-width prefix still applies
    z = min(int(z), domain.bit_width - 1)
    run.prefix_lengths.append(z + 1)

    shift = domain.bit_width - (z + 1)
    prefixes, counts = _prefix_counts(rows, shift, domain)
    chosen = choose_from_support(prefixes, counts, 1, p.beta, p.eps, p.delta, rng)
    if chosen is None:
        # data-independent stand-in so steps 6-8 still run
        chosen = 0
        run.fallbacks += 1
    low = int(chosen) << shift
    high = low | ((1 << shift) - 1)
    at_least_high = n - int(np.searchsorted(rows, _elem(domain, high), side="left"))
    big = sample_laplace(1 / p.eps, rng) + at_least_high
    return high if big >= 1.5 * k else low


def run_rec_prefix(data, beta: float, eps: float, delta: float, rng: RandomSource, *,
                   domain: OrderedDomain | None = None, unsafe_utility: bool = False,
                   presorted: bool = False) -> RecPrefixRun:
    """RecPrefix with the overall budget (beta, eps, delta) and its trace.

    ``data`` is a Dataset, or a row array together with ``domain``. Inputs
    smaller than ``required_sample_size`` are refused unless
    ``unsafe_utility`` is set; privacy holds either way.
    """
    if isinstance(data, Dataset):
        domain = data.domain
        rows = data.sorted_rows
    else:
        if domain is None:
            raise ParameterError("a domain is needed when passing raw rows")
        rows = domain.as_array(data)
        if not presorted:
            rows = np.sort(rows, kind="stable")
    p = level_params(domain, beta, eps, delta)
    check_choosing_params(p.beta, p.eps, p.delta)
    need = required_sample_size(domain, beta, eps, delta)
    if len(rows) < need and not unsafe_utility:
        raise SampleSizeError(f"RecPrefix needs n >= {need} rows, got {len(rows)}")
    run = RecPrefixRun(value=0, params=p)
    run.value = int(_level(rows, domain, p, rng, run))
    return run


def rec_prefix(data, beta: float, eps: float, delta: float, rng: RandomSource, **kw) -> int:
    """Interior point of ``data``; (eps, delta)-DP for every input."""
    return run_rec_prefix(data, beta, eps, delta, rng, **kw).value


def is_interior(x, rows) -> bool:
    rows = np.asarray(rows)
    return bool(len(rows)) and rows.min() <= x <= rows.max()


@dataclass(frozen=True)
class RecPrefixSolver:
    """RecPrefix bound to a domain and budget, for use inside reductions."""

    domain: OrderedDomain
    beta: float
    eps: float
    delta: float
    unsafe_utility: bool = False

    @property
    def sample_size(self) -> int:
        return required_sample_size(self.domain, self.beta, self.eps, self.delta)

    @property
    def budget(self) -> PrivacyBudget:
        return PrivacyBudget(self.eps, self.delta)

    def __call__(self, rows, rng: RandomSource, presorted: bool = False) -> int:
        return rec_prefix(rows, self.beta, self.eps, self.delta, rng, domain=self.domain,
                          unsafe_utility=self.unsafe_utility, presorted=presorted)


@dataclass(frozen=True)
class MedianSolver:
    """Exact lower median. Not private; a baseline and a test double."""

    domain: OrderedDomain
    sample_size: int = 1

    @property
    def budget(self) -> PrivacyBudget:
        return PrivacyBudget(math.inf, 0.0)

    def __call__(self, rows, rng: RandomSource, presorted: bool = False) -> int:
        rows = rows if presorted else np.sort(np.asarray(rows))
        return int(rows[(len(rows) - 1) // 2])


def close_pair_counts(n: int, r: int, trials: int, rng: RandomSource) -> np.ndarray:
    """Per-trial number of pairs (P[2i], P[2i+1]) of a random permutation of
    1..n lying within r/12 of each other."""
    perms = rng.permuted(np.tile(np.arange(1, n + 1, dtype=np.int64), (trials, 1)), axis=1)
    return kernels.count_close_pairs(perms, math.floor(r / 12))
