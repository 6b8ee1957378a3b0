"""Proper private learning of thresholds c_x(y) = 1 iff y <= x.

Learning and the interior-point problem reduce to each other. A learner
runs an interior-point solver on the labeled boundary of the sample. In
the other direction, an interior-point solver labels the lower half 1 and
the upper half 0, then asks a learner.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .domain import Dataset, LabeledDataset, OrderedDomain
from .errors import ParameterError, SampleSizeError
from .interior_point import RecPrefixSolver
from .primitives import PrivacyBudget, RandomSource


@dataclass(frozen=True)
class ThresholdHypothesis:
    cutoff: int

    def predict(self, rows) -> np.ndarray:
        rows = np.asarray(rows)
        return (rows <= _like(rows, self.cutoff)).astype(np.int8)

    def error_on(self, rows, labels) -> float:
        labels = np.asarray(labels)
        if labels.size == 0:
            return 0.0
        return float(np.mean(self.predict(rows) != labels))


def _like(rows: np.ndarray, x: int):
    return np.uint64(x) if rows.dtype == np.uint64 else x


@dataclass(frozen=True)
class ErrorReport:
    empirical_error: float
    generalization_error: float | None = None

    def __post_init__(self):
        for v in (self.empirical_error, self.generalization_error):
            if v is not None and not 0 <= v <= 1:
                raise ValueError("errors must lie in [0, 1]")


def _smallest(values: np.ndarray, count: int) -> np.ndarray:
    if count >= len(values):
        return values
    return np.partition(values, count - 1)[:count] if count > 0 else values[:0]


def _largest(values: np.ndarray, count: int) -> np.ndarray:
    if count >= len(values):
        return values
    return np.partition(values, len(values) - count)[len(values) - count:] if count > 0 else values[:0]


def boundary_rows(data: LabeledDataset, half: int) -> np.ndarray:
    """Largest ``half`` 1-labeled rows and smallest ``half`` 0-labeled rows.

    Missing 1-rows are replaced by min X and missing 0-rows by max X.
    """
    dom = data.domain
    ones = data.rows[data.labels == 1]
    zeros = data.rows[data.labels == 0]
    top = _largest(ones, half)
    bottom = _smallest(zeros, half)
    parts = [np.full(half - len(top), dom.min_element, dtype=data.rows.dtype), top,
             bottom, np.full(half - len(bottom), dom.max_element, dtype=data.rows.dtype)]
    return np.sort(np.concatenate(parts), kind="stable")


def empirical_learn(data: LabeledDataset, alpha: float, beta: float, eps: float, delta: float,
                    rng: RandomSource, *, solver=None, unsafe_utility: bool = False
                    ) -> ThresholdHypothesis:
    """(2 eps, (e^eps + 1) delta)-DP hypothesis that is alpha-consistent w.p. >= 1 - beta.

    The solver sees 2 * floor(alpha * N) boundary rows, so its error on the
    N labeled rows is at most alpha.
    """
    if not 0 < alpha < 1:
        raise ParameterError("alpha must lie in (0, 1)")
    if solver is None:
        solver = RecPrefixSolver(data.domain, beta, eps, delta, unsafe_utility=unsafe_utility)
    half = math.floor(alpha * len(data))
    if half < 1:
        raise SampleSizeError(f"alpha * N must be >= 1, got N = {len(data)}")
    if 2 * half < solver.sample_size and not unsafe_utility:
        raise SampleSizeError(
            f"empirical learning needs N >= {pac_sample_size(alpha, 1.0, solver.sample_size)} rows")
    rows = boundary_rows(data, half)
    return ThresholdHypothesis(int(solver(rows, rng, presorted=True)))


def pac_sample_size(alpha: float, beta: float, n_ipp: int) -> int:
    n = math.ceil(max(n_ipp / (2 * alpha), 4 * math.log2(2 / beta) / alpha))
    # the solver gets 2 * floor(alpha * N) rows, which rounding can leave short
    while 2 * math.floor(alpha * n) < n_ipp:
        n += 1
    return n


def pac_learn(samples: LabeledDataset, alpha: float, beta: float, eps: float, delta: float,
              rng: RandomSource, *, solver=None, unsafe_utility: bool = False
              ) -> ThresholdHypothesis:
    """(2 alpha, 2 beta)-accurate proper PAC learner for realizable i.i.d. samples."""
    if solver is None:
        solver = RecPrefixSolver(samples.domain, beta, eps, delta, unsafe_utility=unsafe_utility)
    need = pac_sample_size(alpha, beta, solver.sample_size)
    if len(samples) < need and not unsafe_utility:
        raise SampleSizeError(f"PAC learning needs >= {need} samples, got {len(samples)}")
    return empirical_learn(samples, alpha, beta, eps, delta, rng, solver=solver,
                           unsafe_utility=unsafe_utility)


def erm_learn(data: LabeledDataset) -> ThresholdHypothesis:
    """Non-private hypothesis with the smallest empirical error.

    Ties go to the largest minimizing cutoff.
    """
    rows, labels = data.rows, data.labels
    order = np.argsort(rows, kind="stable")
    rows, labels = rows[order], labels[order]
    cands = np.unique(np.concatenate([rows, np.array([data.domain.min_element], dtype=rows.dtype)]))
    ones = np.sort(rows[labels == 1])
    zeros = np.sort(rows[labels == 0])
    ones_above = len(ones) - np.searchsorted(ones, cands, side="right")
    zeros_below = np.searchsorted(zeros, cands, side="right")
    err = ones_above + zeros_below
    return ThresholdHypothesis(int(cands[np.flatnonzero(err == err.min())[-1]]))


@dataclass(frozen=True)
class PacLearner:
    """pac_learn bound to its parameters, usable where a learner callable is expected."""

    alpha: float
    beta: float
    eps: float
    delta: float
    solver: object = None
    unsafe_utility: bool = False

    def __call__(self, data: LabeledDataset, rng: RandomSource) -> ThresholdHypothesis:
        return pac_learn(data, self.alpha, self.beta, self.eps, self.delta, rng,
                         solver=self.solver, unsafe_utility=self.unsafe_utility)


def interior_point_from_learner(learner: Callable[[LabeledDataset, RandomSource], ThresholdHypothesis],
                                learner_size: int, data, rng: RandomSource) -> int:
    """Interior point of ``data`` from an empirical learner on learner_size rows.

    The lower half is labeled 1 and the upper half 0 (an odd middle row is
    dropped). The labeled rows are padded with (min X, 1) and (max X, 0) up
    to ``learner_size``, which is n/(3 alpha) for an alpha-accurate learner.
    """
    dom: OrderedDomain = data.domain
    rows = data.sorted_rows
    n = len(rows)
    if n < 2:
        # with one row the halves are empty and the learner sees only padding
        raise ParameterError("the learner reduction needs at least two rows")
    h = n // 2
    extra = learner_size - 2 * h
    if extra < 0:
        raise ParameterError(f"learner size {learner_size} is below the {2 * h} labeled rows")
    lo = extra - extra // 2
    hi = extra // 2
    values = np.concatenate([np.full(lo, dom.min_element, dtype=rows.dtype), rows[:h],
                             rows[n - h:], np.full(hi, dom.max_element, dtype=rows.dtype)])
    labels = np.concatenate([np.ones(lo + h, dtype=np.int8), np.zeros(h + hi, dtype=np.int8)])
    return int(learner(LabeledDataset(dom, values, labels), rng).cutoff)


def subsample_amplify(inner_eps: float, inner_delta: float, m: int, n: int) -> PrivacyBudget:
    """Budget of running an (eps, delta)-DP mechanism on m of n rows drawn with replacement."""
    if not 0 < inner_eps <= 1:
        raise ParameterError(f"inner eps must lie in (0, 1], got {inner_eps}")
    if m < 1 or n < 2 * m:
        raise ParameterError(f"need n >= 2m, got m={m}, n={n}")
    e = 6 * inner_eps * m / n
    return PrivacyBudget(e, math.exp(e) * (4 * m / n) * inner_delta)


def subsample_wrapper(inner: Callable, m: int) -> Callable:
    """Mechanism that runs ``inner`` on m rows drawn with replacement."""

    def wrapped(data, rng: RandomSource):
        idx = rng.integers(0, len(data), size=m)
        if isinstance(data, LabeledDataset):
            sub = LabeledDataset(data.domain, data.rows[idx], data.labels[idx])
        else:
            sub = Dataset(data.domain, data.rows[idx])
        return inner(sub, rng)

    return wrapped
