"""Laplace noise, the exponential and choosing mechanisms, budget accounting.

Randomness always comes from an explicit ``numpy.random.Generator``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ParameterError

RandomSource = np.random.Generator


def make_rng(seed) -> RandomSource:
    return np.random.default_rng(seed)


def trial_rng(seed: int, trial: int) -> RandomSource:
    """Stream for one trial, derived from (seed, trial) alone.

    Trials can therefore run in any order or in parallel and still
    reproduce the same draws.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ParameterError(f"epsilon must be >= 0, got {self.epsilon}")
        if not 0 <= self.delta <= 1:
            raise ParameterError(f"delta must be in [0, 1], got {self.delta}")

    def __add__(self, other: "PrivacyBudget") -> "PrivacyBudget":
        return PrivacyBudget(self.epsilon + other.epsilon, min(1.0, self.delta + other.delta))


def compose(budgets: Sequence[PrivacyBudget]) -> PrivacyBudget:
    """Basic composition: budgets add component-wise."""
    total = PrivacyBudget(0.0, 0.0)
    for b in budgets:
        total = total + b
    return total


def laplace_from_uniform(u, scale: float):
    """Inverse CDF of Lap(scale) evaluated at u in (0, 1)."""
    u = np.asarray(u, dtype=float)
    out = np.where(u < 0.5, scale * np.log(2 * u), -scale * np.log(2 * (1 - u)))
    return out if out.ndim else float(out)


def _open_uniform(rng: RandomSource, size=None):
    u = rng.random(size)
    if size is None:
        while u == 0.0:
            u = rng.random()
        return u
    zero = u == 0.0
    while zero.any():
        u[zero] = rng.random(int(zero.sum()))
        zero = u == 0.0
    return u


def sample_laplace(scale: float, rng: RandomSource) -> float:
    if not scale > 0:
        raise ParameterError(f"Laplace scale must be positive, got {scale}")
    return laplace_from_uniform(_open_uniform(rng), scale)


def laplace_noise(scale: float, rng: RandomSource, size) -> np.ndarray:
    if not scale > 0:
        raise ParameterError(f"Laplace scale must be positive, got {scale}")
    return laplace_from_uniform(_open_uniform(rng, size), scale)


@dataclass(frozen=True)
class QualityFunction:
    """Score of candidate solutions on a dataset.

    ``score(rows, candidates)`` returns one non-negative score per candidate.
    ``support(rows)`` lists the candidates with score >= 1 together with
    their scores; bounded-growth functions can always produce it by scanning
    the rows, which is what the choosing mechanism relies on.
    """

    score: Callable[[np.ndarray, Sequence], np.ndarray]
    sensitivity: float = 1.0
    growth_bound: float = math.inf
    support: Callable[[np.ndarray], tuple[Sequence, np.ndarray]] | None = None


def _rows(data) -> np.ndarray:
    return data.rows if hasattr(data, "rows") else np.asarray(data)


def point_count_quality() -> QualityFunction:
    """q(S, f) = number of rows equal to f (1-bounded growth)."""

    def score(rows, candidates):
        vals, counts = np.unique(rows, return_counts=True)
        lookup = dict(zip(vals.tolist(), counts.tolist()))
        return np.array([lookup.get(c, 0) for c in candidates], dtype=float)

    def support(rows):
        vals, counts = np.unique(rows, return_counts=True)
        return vals.tolist(), counts.astype(float)

    return QualityFunction(score, 1.0, 1, support)


def _sample_weighted(log_weights: np.ndarray, rng: RandomSource) -> int:
    w = np.exp(log_weights - log_weights.max())
    cdf = np.cumsum(w)
    return int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))


def exponential_from_scores(scores, eps: float, sensitivity: float, rng: RandomSource) -> int:
    """Index sampled with probability proportional to exp(eps*score/(2*sensitivity))."""
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise ParameterError("exponential mechanism needs at least one candidate")
    if not eps > 0 or not sensitivity > 0:
        raise ParameterError("eps and sensitivity must be positive")
    return _sample_weighted(eps * scores / (2 * sensitivity), rng)


def exponential_mechanism(data, q: QualityFunction, candidates: Sequence, eps: float,
                          rng: RandomSource):
    if len(candidates) == 0:
        raise ParameterError("exponential mechanism needs at least one candidate")
    scores = q.score(_rows(data), candidates)
    return candidates[exponential_from_scores(scores, eps, q.sensitivity, rng)]


def choosing_threshold(k: float, beta: float, eps: float, delta: float) -> float:
    """Noisy-OPT cutoff below which the choosing mechanism returns None."""
    return (8 / eps) * math.log(4 * k / (beta * eps * delta))


def check_choosing_params(beta: float, eps: float, delta: float) -> None:
    if not 0 < eps <= 2:
        raise ParameterError(f"choosing mechanism needs 0 < eps <= 2, got {eps}")
    if not 0 < beta <= 1 or not 0 < delta <= 1:
        raise ParameterError("beta and delta must lie in (0, 1]")


def choose_from_support(candidates: Sequence, scores: np.ndarray, k: float, beta: float,
                        eps: float, delta: float, rng: RandomSource, sensitivity: float = 1.0):
    """Choosing mechanism given G(S) and its scores; None stands for ⊥."""
    check_choosing_params(beta, eps, delta)
    scores = np.asarray(scores, dtype=float)
    keep = scores >= 1
    scores = scores[keep]
    opt = float(scores.max()) if scores.size else 0.0
    if opt + sample_laplace(4 / eps, rng) < choosing_threshold(k, beta, eps, delta):
        return None
    if scores.size == 0:
        return None
    idx = np.flatnonzero(keep)[exponential_from_scores(scores, eps / 2, sensitivity, rng)]
    return candidates[int(idx)]


def choosing_mechanism(data, q: QualityFunction, beta: float, eps: float, delta: float,
                       rng: RandomSource):
    """Noisy-OPT gate followed by the exponential mechanism over G(S).

    Returns None (⊥) when the gate fails. Never returns a zero-quality
    candidate.
    """
    if q.support is None:
        raise ParameterError("choosing mechanism needs a quality function with support()")
    if not math.isfinite(q.growth_bound):
        raise ParameterError("choosing mechanism needs a finite growth bound")
    candidates, scores = q.support(_rows(data))
    return choose_from_support(candidates, scores, q.growth_bound, beta, eps, delta, rng,
                               q.sensitivity)
