import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from threshdp.audit import AuditConfig, binned_cells, estimate_epsilon
from threshdp.domain import Dataset, OrderedDomain
from threshdp.errors import DomainError, ParameterError, ProtocolError, SampleSizeError
from threshdp.interior_point import MedianSolver, RecPrefixSolver
from threshdp.release import (AccuracyParams, StepCdf, empirical_cdf, interior_point_from_release,
                              kolmogorov_distance, learn_distribution, max_threshold_error,
                              project_cdf, quantiles_to_cdf, release_from_learner,
                              thresh2_blocks, thresh2_noise_scale, thresh2_quantiles,
                              thresh2_release, thresh2_sample_size, thresh_release,
                              thresh_sample_size, tree_release, tree_release_counts)
from threshdp.primitives import make_rng, trial_rng


def cdf_oracle(rows, t):
    rows = np.asarray(rows)
    return np.array([np.mean(rows <= x) for x in t])


def test_step_cdf_semantics():
    cdf = StepCdf(np.array([2, 5], dtype=np.uint64), np.array([0.25, 1.0]))
    assert cdf(np.array([0, 1, 2, 4, 5, 9], dtype=np.uint64)).tolist() == [0, 0, 0.25, 0.25, 1, 1]
    with pytest.raises(ValueError):
        StepCdf(np.array([5, 2]), np.array([0.1, 0.2]))
    with pytest.raises(ValueError):
        StepCdf(np.array([1, 2]), np.array([0.5, 0.2]))
    with pytest.raises(ValueError):
        StepCdf(np.array([1]), np.array([1.5]))


@given(st.lists(st.integers(0, 255), min_size=1, max_size=200))
def test_empirical_cdf_matches_oracle(rows):
    cdf = empirical_cdf(Dataset(OrderedDomain(8), rows))
    grid = np.arange(256, dtype=np.uint64)
    assert np.allclose(cdf(grid), cdf_oracle(rows, grid))
    assert cdf.values[-1] == 1.0


def test_kolmogorov_distance():
    a = StepCdf(np.array([1, 3]), np.array([0.5, 1.0]))
    b = StepCdf(np.array([2]), np.array([1.0]))
    assert kolmogorov_distance(a, b) == 0.5
    assert kolmogorov_distance(a, a) == 0.0


# -- tree ---------------------------------------------------------------------

@given(st.integers(1, 70), st.lists(st.integers(0, 10**6), min_size=1, max_size=70))
def test_tree_noise_free_is_exact(k, seed_rows):
    rows = np.array(seed_rows) % k
    cdf = tree_release(rows, k, 1.0, None, noise=False)
    counts = np.cumsum(np.bincount(rows, minlength=k))
    assert np.array_equal(cdf.values, counts / len(rows))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 64), st.integers(1, 500), st.integers(0, 2**31))
def test_tree_answers_are_valid_cdf_values(k, n, seed):
    rng = make_rng(seed)
    cdf = tree_release(rng.integers(0, k, size=n), k, 0.5, rng)
    assert np.all((cdf.values >= 0) & (cdf.values <= 1))
    assert np.all(np.diff(cdf.values) >= 0)
    assert cdf.values[-1] == 1.0


def test_tree_single_value():
    rows = np.full(10_000, 17)
    cdf = tree_release(rows, 64, 1.0, make_rng(0))
    exact = (np.arange(64) >= 17).astype(float)
    assert np.max(np.abs(cdf.values - exact)) <= 4 * math.log2(10) * 6**2.5 / 10_000
    assert cdf.meta["noise_scale"] == 2 * 6 / 1.0


def test_tree_rejects_bad_input():
    with pytest.raises(DomainError):
        tree_release([0, 64], 64, 1.0, make_rng(0))
    with pytest.raises(ParameterError):
        tree_release_counts([0, 0], 1.0, make_rng(0))


# -- Thresh -------------------------------------------------------------------

def _uniform(width, n, rng):
    return Dataset(OrderedDomain(width), rng.integers(0, 2**width, size=n, dtype=np.uint64))


def test_thresh_sizes():
    assert thresh_sample_size(0.1, 0.1, 1.0, 10**5) == 6 * 10**6
    small = thresh_sample_size(0.1, 0.1, 1.0, 1)
    assert small == math.ceil(25 * math.log2(240) * math.log2(60) ** 2.5 / 0.1)
    assert thresh2_blocks(0.25) == 16 and thresh2_blocks(0.1) == 32 and thresh2_blocks(1.0) == 4
    assert thresh2_sample_size(0.25, 0.1, 1.0, 1000) == 32_000


def test_thresh_refuses_small_inputs():
    data = _uniform(10, 1000, make_rng(0))
    with pytest.raises(SampleSizeError):
        thresh_release(data, AccuracyParams(0.1, 0.1), 1.0, 0.1, make_rng(0))


def test_thresh_uniform_dataset():
    dom = OrderedDomain(10)
    alpha, beta = 0.1, 0.1
    grid = np.arange(dom.size, dtype=np.uint64)
    good = 0
    for t in range(20):
        rng = trial_rng(21, t)
        data = _uniform(10, 200_000, rng)
        cdf = thresh_release(data, AccuracyParams(alpha, beta), 1.0, 0.1, rng,
                             solver=MedianSolver(dom), diagnostics=True)
        good += np.max(np.abs(cdf(grid) - cdf_oracle(data.rows, grid))) <= alpha
        assert cdf.meta["blocks"] == 60 and cdf.meta["alpha_effective"] == pytest.approx(0.1)
        assert all(cdf.meta[k] for k in ("exhausted", "solver_success", "block_size_ok", "tree_ok"))
    assert good >= 18


def test_thresh_constant_dataset():
    dom = OrderedDomain(10)
    data = Dataset(dom, np.full(200_000, 333))
    cdf = thresh_release(data, AccuracyParams(0.1, 0.1), 1.0, 0.1, make_rng(1),
                         solver=MedianSolver(dom))
    grid = np.arange(dom.size, dtype=np.uint64)
    assert np.max(np.abs(cdf(grid) - (grid >= 333))) <= 0.1


def test_thresh_private_solver_small_scale():
    # privacy holds below the utility sizing; only validity of the output is checked
    data = _uniform(8, 3000, make_rng(2))
    cdf = thresh_release(data, AccuracyParams(0.25, 0.1), 1.0, 0.1, make_rng(2), unsafe_utility=True)
    assert np.all(np.diff(cdf.values) >= 0) and np.all((cdf.values >= 0) & (cdf.values <= 1))


def test_thresh_audit_tiny_instance():
    dom = OrderedDomain(4)
    rows = np.array([i % 16 for i in range(40)], dtype=np.uint64)
    other = rows.copy()
    other[0] = 15
    solver = RecPrefixSolver(dom, 0.1, 1.0, 0.01, unsafe_utility=True)

    def mech(data, rng):
        cdf = thresh_release(data, AccuracyParams(0.5, 0.1), 1.0, 0.01, rng, solver=solver,
                             ipp_m=4, unsafe_utility=True)
        return float(cdf(np.array([7], dtype=np.uint64))[0])

    cells, cell_of = binned_cells(np.linspace(0.1, 0.9, 9))
    est = estimate_epsilon(mech, AuditConfig(Dataset(dom, rows), Dataset(dom, other), cells,
                                             cell_of, trials=4000), 5)
    assert est.eps_lower <= 5 * 1.0 + 0.5


# -- Thresh2 ------------------------------------------------------------------

def test_thresh2_quartiles_of_distinct_rows():
    n, alpha, beta = 200_000, 0.25, 0.1
    dom = OrderedDomain(18)
    data = Dataset(dom, np.arange(n))
    a_eff = 3 / thresh2_blocks(alpha)
    good = 0
    for t in range(100):
        q = thresh2_quantiles(data, AccuracyParams(alpha, beta), 1.0, 0.1, trial_rng(22, t),
                              solver=MedianSolver(dom))
        ranks = np.array(q)  # row value == rank
        want = np.arange(1, len(q) + 1) * a_eff * n / 3
        good += np.max(np.abs(ranks - want)) <= alpha * n / 3
    assert good >= (1 - beta) * 100


def test_thresh2_noise_bound():
    alpha, eps, beta = 0.25, 1.0, 0.1
    dom = OrderedDomain(18)
    data = Dataset(dom, np.arange(200_000))
    k = thresh2_blocks(alpha)
    # the 11 log^2.5(1/alpha)/eps bound is for node noise of scale log(k)/(2 eps);
    # scale it to the noise actually used
    bound = 11 * math.log2(1 / alpha) ** 2.5 / eps * thresh2_noise_scale(k, eps) / (math.log2(k) / (2 * eps))
    ok = 0
    for t in range(200):
        _, meta = thresh2_quantiles(data, AccuracyParams(alpha, beta), eps, 0.1, trial_rng(23, t),
                                    solver=MedianSolver(dom), return_meta=True)
        ok += np.max(np.abs(meta["eta"])) <= bound
    assert ok >= (1 - beta / 2) * 200
    assert thresh2_noise_scale(16, 1.0) == 8.0


def test_thresh2_constant_dataset_and_release():
    dom = OrderedDomain(10)
    data = Dataset(dom, np.full(100_000, 77))
    acc = AccuracyParams(0.25, 0.1)
    q = thresh2_quantiles(data, acc, 1.0, 0.1, make_rng(3), solver=MedianSolver(dom))
    assert set(q) == {77}
    cdf = thresh2_release(data, acc, 1.0, 0.1, make_rng(3), solver=MedianSolver(dom))
    assert cdf.breakpoints.tolist() == [77]


def test_quantiles_to_cdf():
    cdf = quantiles_to_cdf([5, 2, 5], 0.75, OrderedDomain(4))
    assert cdf.breakpoints.tolist() == [2, 5]
    assert cdf.values.tolist() == pytest.approx([0.25, 0.75])


# -- reductions -----------------------------------------------------------------

def exact_release(data, rng):
    return empirical_cdf(data)


def test_interior_point_from_exact_release():
    dom = OrderedDomain(4)
    assert interior_point_from_release(exact_release, 80, Dataset(dom, [9] * 10), make_rng(0)) == 9
    out = interior_point_from_release(exact_release, 80, Dataset(dom, [3] * 10 + [7] * 10),
                                      make_rng(0))
    assert 3 <= out <= 7
    with pytest.raises(ParameterError):
        interior_point_from_release(exact_release, 4, Dataset(dom, [1] * 10), make_rng(0))
    with pytest.raises(ProtocolError):
        interior_point_from_release(lambda d, r: StepCdf(np.array([0]), np.array([0.1])), 20,
                                    Dataset(dom, [1] * 10), make_rng(0))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 255), min_size=1, max_size=40))
def test_interior_point_from_exact_release_property(rows):
    dom = OrderedDomain(8)
    out = interior_point_from_release(exact_release, 8 * 10 * len(rows), Dataset(dom, rows),
                                      make_rng(0))
    assert min(rows) <= out <= max(rows)


def test_interior_point_from_noisy_release():
    dom = OrderedDomain(10)
    alpha, beta = 0.1, 0.1
    release_size = 200_000
    n = math.floor(8 * alpha * release_size)

    def release(data, rng):
        return thresh_release(data, AccuracyParams(alpha, beta), 1.0, 0.1, rng,
                              solver=MedianSolver(dom))

    good = 0
    for t in range(20):
        rng = trial_rng(24, t)
        lo = int(rng.integers(0, 900))
        data = Dataset(dom, rng.integers(lo, lo + 100, size=n))
        out = interior_point_from_release(release, release_size, data, rng)
        good += int(data.rows.min()) <= out <= int(data.rows.max())
    assert good >= (1 - 2 * beta) * 20


def test_learn_distribution_uniform_source():
    dom = OrderedDomain(10)
    alpha, beta = 0.1, 0.1
    truth = (np.arange(dom.size) + 1) / dom.size
    good = 0
    for t in range(20):
        rng = trial_rng(25, t)
        samples = _uniform(10, 200_000, rng)
        cdf = learn_distribution(samples, AccuracyParams(alpha, beta), 1.0, 0.1, rng,
                                 solver=MedianSolver(dom))
        assert cdf.values[-1] == 1.0 and int(cdf.breakpoints[-1]) == dom.max_element
        good += np.max(np.abs(cdf(np.arange(dom.size, dtype=np.uint64)) - truth)) <= 2 * alpha
    assert good >= (1 - 2 * beta) * 20


def test_learn_distribution_point_mass_and_sizing():
    dom = OrderedDomain(10)
    samples = Dataset(dom, np.full(200_000, 500))
    cdf = learn_distribution(samples, AccuracyParams(0.1, 0.1), 1.0, 0.1, make_rng(4),
                             solver=MedianSolver(dom))
    grid = np.arange(dom.size, dtype=np.uint64)
    assert np.max(np.abs(cdf(grid) - (grid >= 500))) <= 0.2
    with pytest.raises(SampleSizeError):
        learn_distribution(Dataset(dom, [1] * 100), AccuracyParams(0.1, 0.1), 1.0, 0.1,
                           make_rng(0), solver=MedianSolver(dom))


def test_project_cdf():
    cdf = project_cdf(StepCdf(np.array([1, 4]), np.array([0.2, 0.6])), OrderedDomain(3))
    assert cdf.breakpoints.tolist() == [1, 4, 7] and cdf.values.tolist() == [0.2, 0.6, 1.0]


def test_release_from_learner():
    dom = OrderedDomain(8)
    with pytest.raises(SampleSizeError):
        release_from_learner(exact_release, 100, Dataset(dom, [1] * 899), make_rng(0))
    const = Dataset(dom, [42] * 900)
    assert max_threshold_error(release_from_learner(exact_release, 100, const, make_rng(0)),
                               const) == 0.0
    m, beta = 2000, 0.1
    dkw = math.sqrt(math.log(2 / beta) / (2 * m))
    hits = 0
    for t in range(100):
        rng = trial_rng(26, t)
        data = Dataset(dom, rng.integers(0, 256, size=9 * m))
        hits += max_threshold_error(release_from_learner(exact_release, m, data, rng), data) <= dkw
    assert hits >= (1 - beta) * 100
