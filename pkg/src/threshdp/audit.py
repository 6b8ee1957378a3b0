"""Empirical privacy audits and benchmark experiments.

An audit can refute a privacy claim but never certify one: it runs a
mechanism many times on a pair of neighboring datasets and reports the
largest log-ratio of cell probabilities that survives the confidence
bounds.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .domain import Dataset, LabeledDataset, OrderedDomain
from .errors import ConfigError, ParameterError
from .interior_point import MedianSolver, is_interior, run_rec_prefix
from .learning import ThresholdHypothesis, erm_learn, pac_learn
from .primitives import PrivacyBudget, RandomSource, laplace_noise, trial_rng
from .release import (AccuracyParams, empirical_cdf, max_threshold_error, thresh2_release,
                      thresh_release, tree_release)

THREADS_ENV = "THRESHDP_THREADS"
CHUNK = 1 << 14


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def seed_from(rng) -> int:
    """Master seed from an int or a Generator."""
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(0, 2**63 - 1))
    return int(rng)


def _map(fn, items):
    threads = thread_count()
    if threads == 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(fn, items))


# -- confidence intervals ---------------------------------------------------

def clopper_pearson(hits, trials: int, level: float = 0.95):
    """Exact two-sided binomial interval; works elementwise on arrays."""
    hits = np.asarray(hits, dtype=float)
    a = (1 - level) / 2
    lo = np.where(hits > 0, stats.beta.ppf(a, hits, trials - hits + 1), 0.0)
    hi = np.where(hits < trials, stats.beta.ppf(1 - a, hits + 1, trials - hits), 1.0)
    return lo, hi


def wilson(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    z = stats.norm.ppf(1 - (1 - level) / 2)
    p = successes / trials
    denom = 1 + z * z / trials
    mid = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, mid - half), min(1.0, mid + half)


# -- epsilon audit ----------------------------------------------------------

@dataclass(frozen=True)
class AuditConfig:
    """Neighboring pair, output partition and claimed budget.

    ``cell_of`` maps an array of outputs to integer cells in [0, cells).
    """

    data: Dataset
    neighbor: Dataset
    cells: int
    cell_of: Callable[[np.ndarray], np.ndarray]
    trials: int
    claimed: PrivacyBudget = PrivacyBudget(math.inf, 0.0)
    delta: float = 0.0
    level: float = 0.95

    def __post_init__(self):
        if len(self.data) != len(self.neighbor):
            raise ConfigError("neighbors must have the same size")
        a, b = np.asarray(self.data.rows), np.asarray(self.neighbor.rows)
        if int(np.sum(a != b)) != 1:
            raise ConfigError("neighbors must differ in exactly one row")
        if self.cells < 1 or self.trials < 1:
            raise ConfigError("need at least one cell and one trial")


def element_cells(domain: OrderedDomain) -> tuple[int, Callable]:
    """One cell per element of a tiny domain."""
    return domain.size, lambda out: np.asarray(out, dtype=np.int64)


def binned_cells(edges: Sequence[float]) -> tuple[int, Callable]:
    """Cells (-inf, e0), [e0, e1), ..., [e_last, inf) for scalar outputs."""
    edges = np.asarray(edges, dtype=float)
    return len(edges) + 1, lambda out: np.searchsorted(edges, np.asarray(out, dtype=float),
                                                       side="right")


@dataclass(frozen=True)
class EpsilonEstimate:
    eps_lower: float
    eps_point: float
    cell: int | None
    trials: int
    p_hits: tuple = field(default=(), repr=False)
    q_hits: tuple = field(default=(), repr=False)

    @property
    def interval(self) -> tuple[float, float]:
        return self.eps_lower, max(self.eps_lower, self.eps_point)


def _histogram(mech, data, config: AuditConfig, seed: int, salt: int) -> np.ndarray:
    batch = getattr(mech, "sample_batch", None)
    chunks = range(math.ceil(config.trials / CHUNK))

    def run(c):
        rng = trial_rng(seed, salt * (1 << 40) + c)
        size = min(CHUNK, config.trials - c * CHUNK)
        out = batch(data, rng, size) if batch else [mech(data, rng) for _ in range(size)]
        return np.bincount(config.cell_of(np.asarray(out)), minlength=config.cells)

    return np.sum(_map(run, chunks), axis=0)


def _log_ratio(num, den, delta):
    """max(0, ln((num - delta) / den)); +inf where only the denominator vanishes."""
    num = np.asarray(num, dtype=float) - delta
    den = np.asarray(den, dtype=float)
    out = np.zeros(np.broadcast(num, den).shape)
    pos = num > 0
    out[pos & (den == 0)] = np.inf
    both = pos & (den > 0)
    out[both] = np.log(num[both] / den[both])
    return np.maximum(out, 0.0)


def estimate_epsilon(mech, config: AuditConfig, rng) -> EpsilonEstimate:
    """Lower confidence bound on the epsilon ``mech`` spends on the pair.

    Per-cell Clopper-Pearson intervals are Bonferroni-corrected over the
    cells and both directions, so the reported lower bound exceeds the true
    value with probability at most 1 - level.
    """
    seed = seed_from(rng)
    p_hits = _histogram(mech, config.data, config, seed, 1)
    q_hits = _histogram(mech, config.neighbor, config, seed, 2)
    t = config.trials
    level = 1 - (1 - config.level) / (2 * config.cells)
    p_lo, p_hi = clopper_pearson(p_hits, t, level)
    q_lo, q_hi = clopper_pearson(q_hits, t, level)
    lower = np.concatenate([_log_ratio(p_lo, q_hi, config.delta), _log_ratio(q_lo, p_hi, config.delta)])
    point = np.concatenate([_log_ratio(p_hits / t, q_hits / t, config.delta),
                            _log_ratio(q_hits / t, p_hits / t, config.delta)])
    best = int(np.argmax(lower))
    cell = best % config.cells if lower[best] > 0 else None
    return EpsilonEstimate(float(lower[best]), float(point.max()), cell, t,
                           tuple(p_hits.tolist()), tuple(q_hits.tolist()))


@dataclass(frozen=True)
class LaplaceCount:
    """Number of rows >= threshold plus Lap(1/eps)."""

    eps: float
    threshold: int = 1

    def _count(self, data) -> int:
        return int(np.sum(np.asarray(data.rows) >= self.threshold))

    def __call__(self, data, rng: RandomSource) -> float:
        return float(self._count(data) + laplace_noise(1 / self.eps, rng, 1)[0])

    def sample_batch(self, data, rng: RandomSource, size: int) -> np.ndarray:
        return self._count(data) + laplace_noise(1 / self.eps, rng, size)


@dataclass(frozen=True)
class ConstantMechanism:
    value: float = 0.0

    def __call__(self, data, rng: RandomSource) -> float:
        return self.value

    def sample_batch(self, data, rng: RandomSource, size: int) -> np.ndarray:
        return np.full(size, self.value)


@dataclass(frozen=True)
class RecPrefixMechanism:
    beta: float
    eps: float
    delta: float

    def __call__(self, data, rng: RandomSource) -> int:
        return run_rec_prefix(data, self.beta, self.eps, self.delta, rng, unsafe_utility=True).value


def median_mechanism(data, rng: RandomSource) -> int:
    return MedianSolver(data.domain)(data.rows, rng)


# -- experiments ------------------------------------------------------------

@dataclass(frozen=True)
class ResultRow:
    point: tuple
    metric: str
    value: float
    lower: float | None = None
    upper: float | None = None


def _enc(v) -> str:
    return "" if v is None else repr(float(v))


def _dec(s: str):
    return None if s == "" else float(s)


@dataclass
class ExperimentResult:
    name: str
    rows: list = field(default_factory=list)

    def add(self, point: dict, metric: str, value: float, lower=None, upper=None):
        self.rows.append(ResultRow(tuple(sorted(point.items())), metric, float(value),
                                   None if lower is None else float(lower),
                                   None if upper is None else float(upper)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["experiment", "point", "metric", "value", "lower", "upper"])
        for r in self.rows:
            w.writerow([self.name, json.dumps(dict(r.point), sort_keys=True), r.metric,
                        _enc(r.value), _enc(r.lower), _enc(r.upper)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ExperimentResult":
        reader = csv.DictReader(io.StringIO(text))
        result = None
        for rec in reader:
            if result is None:
                result = cls(rec["experiment"])
            point = tuple(sorted(json.loads(rec["point"]).items()))
            result.rows.append(ResultRow(point, rec["metric"], float(rec["value"]),
                                         _dec(rec["lower"]), _dec(rec["upper"])))
        return result if result is not None else cls("")

    def to_json(self) -> str:
        return json.dumps({"name": self.name, "rows": [
            {"point": dict(r.point), "metric": r.metric, "value": r.value,
             "lower": r.lower, "upper": r.upper} for r in self.rows]})

    def __eq__(self, other):
        return isinstance(other, ExperimentResult) and self.name == other.name \
            and self.rows == other.rows


def _uniform_rows(p, rng):
    return Dataset(OrderedDomain(p["width"]), rng.integers(0, 2 ** p["width"], size=p["n"],
                                                             dtype=np.uint64))


def _labeled(p, rng):
    dom = OrderedDomain(p["width"])
    rows = rng.integers(0, 2 ** p["width"], size=p["n"], dtype=np.uint64)
    target = ThresholdHypothesis(int(p.get("target", 2 ** (p["width"] - 1))))
    return LabeledDataset(dom, rows, target.predict(rows)), target


def _holdout_error(h, target, p, rng):
    test = rng.integers(0, 2 ** p["width"], size=p.get("holdout", 20000), dtype=np.uint64)
    return float(np.mean(h.predict(test) != target.predict(test)))


def _bench_rec_prefix(p, rng):
    data = _uniform_rows(p, rng)
    run = run_rec_prefix(data, p.get("beta", 0.1), p.get("eps", 1.0), p.get("delta", 0.1), rng,
                         unsafe_utility=True)
    return {"success": is_interior(run.value, data.rows)}


def _bench_median(p, rng):
    data = _uniform_rows(p, rng)
    return {"success": is_interior(median_mechanism(data, rng), data.rows)}


def _release_metrics(p, rng, release):
    data = _uniform_rows(p, rng)
    err = max_threshold_error(release(data), data)
    return {"max_error": err, "success": err <= p["alpha"]}


def _bench_thresh(p, rng):
    acc = AccuracyParams(p["alpha"], p.get("beta", 0.1))
    return _release_metrics(p, rng, lambda d: thresh_release(
        d, acc, p.get("eps", 1.0), p.get("delta", 0.1), rng, unsafe_utility=True))


def _bench_thresh2(p, rng):
    acc = AccuracyParams(p["alpha"], p.get("beta", 0.1))
    return _release_metrics(p, rng, lambda d: thresh2_release(
        d, acc, p.get("eps", 1.0), p.get("delta", 0.1), rng, unsafe_utility=True))


def _bench_tree(p, rng):
    k = p.get("leaves", 64)
    return _release_metrics(p, rng, lambda d: tree_release(
        Dataset(d.domain, d.rows % np.uint64(k)), k, p.get("eps", 1.0), rng))


def _bench_empirical_cdf(p, rng):
    return _release_metrics(p, rng, empirical_cdf)


def _bench_pac(p, rng):
    data, target = _labeled(p, rng)
    h = pac_learn(data, p["alpha"], p.get("beta", 0.1), p.get("eps", 1.0), p.get("delta", 0.1),
                  rng, unsafe_utility=True)
    err = _holdout_error(h, target, p, rng)
    return {"generalization_error": err, "success": err <= 2 * p["alpha"]}


def _bench_erm(p, rng):
    data, target = _labeled(p, rng)
    err = _holdout_error(erm_learn(data), target, p, rng)
    return {"generalization_error": err, "success": err <= 2 * p["alpha"]}


MECHANISMS: dict[str, Callable[[dict, RandomSource], dict]] = {
    "rec_prefix": _bench_rec_prefix,
    "median": _bench_median,
    "thresh": _bench_thresh,
    "thresh2": _bench_thresh2,
    "tree": _bench_tree,
    "empirical_cdf": _bench_empirical_cdf,
    "pac_learn": _bench_pac,
    "erm": _bench_erm,
}


def _grid(spec: dict) -> list[dict]:
    grid = spec.get("grid", {})
    keys = sorted(grid)
    base = dict(spec.get("params", {}))
    return [{**base, **dict(zip(keys, vals))} for vals in itertools.product(*(grid[k] for k in keys))]


def run_benchmark(spec: dict, rng) -> ExperimentResult:
    """Run every grid point of ``spec`` for ``spec['trials']`` trials.

    ``spec`` holds ``name``, ``mechanism`` (one or a list of registered
    names), ``grid`` (parameter -> values), fixed ``params`` and ``trials``.
    Boolean metrics become rates with Wilson intervals; numeric metrics
    report their mean and maximum.
    """
    names = spec.get("mechanism")
    names = [names] if isinstance(names, str) else list(names or [])
    unknown = [n for n in names if n not in MECHANISMS]
    if not names or unknown:
        raise ConfigError(f"unknown mechanism(s) {unknown or names}; known: {sorted(MECHANISMS)}")
    trials = int(spec.get("trials", 10))
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    seed = seed_from(rng)
    result = ExperimentResult(spec.get("name", "experiment"))
    for pi, point in enumerate(_grid(spec)):
        for name in names:
            fn = MECHANISMS[name]
            outs = _map(lambda t: fn(point, trial_rng(seed, pi * 1_000_003 + t)), range(trials))
            tag = {**point, "mechanism": name}
            for metric in outs[0]:
                vals = [o[metric] for o in outs]
                if isinstance(vals[0], (bool, np.bool_)):
                    s = sum(bool(v) for v in vals)
                    result.add(tag, metric + "_rate", s / trials, *wilson(s, trials))
                else:
                    result.add(tag, metric + "_mean", float(np.mean(vals)))
                    result.add(tag, metric + "_max", float(np.max(vals)))
    return result
