import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from threshdp.attacks import (PIRATES, HardDistParams, MixedRadixWord, attack_mechanism,
                              constant_min, coordinate_median, element_mechanism, fpc_gen,
                              fpc_radix, fpc_sizes, fpc_trace, hard_dist_sample, is_feasible)
from threshdp.domain import OrderedDomain, lcp_length
from threshdp.errors import DomainError, ParameterError, TowerOverflowError
from threshdp.interior_point import rec_prefix
from threshdp.primitives import make_rng, trial_rng


def words(radix, length):
    return st.lists(st.integers(0, radix - 1), min_size=length, max_size=length).map(
        lambda d: MixedRadixWord(tuple(d), radix))


word_pairs = st.tuples(st.integers(2, 200), st.integers(0, 12)).flatmap(
    lambda p: st.tuples(words(*p), words(*p)))


@given(word_pairs)
def test_word_order_and_value_agree(pair):
    a, b = pair
    assert (a < b) == (a.value < b.value)
    assert MixedRadixWord.from_value(a.value, a.radix, len(a)) == a


@given(word_pairs)
def test_agreement_oracle(pair):
    a, b = pair
    n = 0
    while n < len(a) and a.digits[n] == b.digits[n]:
        n += 1
    assert a.agreement(b) == b.agreement(a) == n


@given(word_pairs)
def test_bits_view_is_order_preserving(pair):
    a, b = pair
    assert (a.to_bits() < b.to_bits()) == (a < b)
    assert MixedRadixWord.from_bits(a.to_bits(), a.radix, len(a)) == a


@given(st.integers(2, 40), st.integers(1, 6), st.data())
def test_from_bits_is_largest_word_below(radix, length, data):
    w = (radix - 1).bit_length()
    x = data.draw(st.integers(0, 2 ** (w * length) - 1))
    got = MixedRadixWord.from_bits(x, radix, length)
    assert got.to_bits() <= x
    if radix ** length <= 5000:
        below = [v for v in range(radix**length)
                 if MixedRadixWord.from_value(v, radix, length).to_bits() <= x]
        assert got.value == max(below)


def test_word_validation():
    with pytest.raises(DomainError):
        MixedRadixWord((3,), 3)
    with pytest.raises(DomainError):
        MixedRadixWord((0,), 1)
    with pytest.raises(DomainError):
        MixedRadixWord.from_value(9, 3, 2)
    with pytest.raises(DomainError):
        MixedRadixWord((0, 1), 3) < MixedRadixWord((0,), 3)


# -- size arithmetic ----------------------------------------------------------

def test_fpc_sizes():
    assert fpc_radix(1, 0.05) == 40 and fpc_radix(2, 0.05) == 160
    assert fpc_sizes(3, 0.05) == [1, 40, 160**40]
    with pytest.raises(TowerOverflowError):
        fpc_sizes(4, 0.05)


def test_hard_dist_sizes():
    p = HardDistParams()
    assert [p.b(j) for j in (1, 2, 3)] == [50, 200, 450]
    assert p.sizes(3) == [2, 2500, 200**2500]
    assert p.S(2) == 2500


def test_success_cap():
    p = HardDistParams()
    e = math.exp(0.1)
    assert p.P(2, 0.1) == pytest.approx(e / (e + 1) + (e + 1) * (1 / 50 + 1 / 200))
    assert p.P(3, 0.1) < 1 - 0.1


# -- hard distribution --------------------------------------------------------

def test_hard_dist_level_one_is_fair():
    draws = [hard_dist_sample(1, HardDistParams(), trial_rng(41, t)).rows[0].digits[0]
             for t in range(4000)]
    assert abs(np.mean(draws) - 0.5) < 0.03


@pytest.mark.parametrize("level", [2, 3])
def test_hard_dist_structure(level):
    p = HardDistParams()
    for t in range(20):
        db = hard_dist_sample(level, p, trial_rng(42, t))
        assert not db.truncated
        assert len(db.rows) == level
        assert len(db.rows[0]) == p.sizes(level - 1)[-1]
        assert db.radix == p.b(level - 1)
        y0 = db.rows[0]
        for row, x in zip(db.rows[1:], db.agreements):
            assert row.agreement(y0) >= x
        floor = min(db.agreements)
        assert all(a.agreement(b) >= floor for a in db.rows for b in db.rows)


def test_hard_dist_bits_view_matches_lcp():
    db = hard_dist_sample(2, HardDistParams(), make_rng(3))
    data = db.as_dataset()
    w = db.rows[0].bits_per_digit
    a, b = int(data.rows[0]), int(data.rows[1])
    assert lcp_length(a, b, data.domain) >= w * db.rows[0].agreement(db.rows[1])


def test_hard_dist_truncation_flag():
    db = hard_dist_sample(4, HardDistParams(digit_budget=64), make_rng(4))
    assert db.truncated and len(db.rows[0]) == 64
    with pytest.raises(ParameterError):
        hard_dist_sample(0, HardDistParams(), make_rng(0))


# -- fingerprinting code ------------------------------------------------------

def test_single_user_code():
    book = fpc_gen(1, 0.05, make_rng(0))
    assert len(book.codewords) == 1 and len(book.codewords[0]) == 0
    assert fpc_trace(book.codewords[0], book).accused == 0


def test_two_user_code_shape():
    book = fpc_gen(2, 0.05, make_rng(1))
    assert book.radix == 40 and book.length == 1
    assert fpc_trace(book.codewords[0], book).accused == 0
    assert fpc_trace(book.codewords[1], book).accused == 1


def test_three_user_code_shape_and_members():
    for t in range(200):
        book = fpc_gen(3, 0.05, trial_rng(43, t))
        assert (book.radix, book.length) == (160, 40) and not book.truncated
        for i, w in enumerate(book.codewords):
            assert fpc_trace(w, book).accused == i


def test_trace_rejects_bad_shape():
    book = fpc_gen(3, 0.05, make_rng(2))
    with pytest.raises(DomainError):
        fpc_trace(MixedRadixWord((0,) * 39, 160), book)
    with pytest.raises(ParameterError):
        fpc_gen(0, 0.05, make_rng(0))


def test_coordinate_median_of_full_coalition_always_traced():
    rep = attack_mechanism(coordinate_median, 3, 0.05, 10_000, seed=44, coalition=(0, 1, 2))
    assert rep.bot_rate == 0.0


COALITIONS = [(0,), (1,), (2,), (0, 1), (0, 2), (1, 2), (0, 1, 2)]


@pytest.mark.parametrize("coalition", COALITIONS)
def test_completeness_and_soundness(coalition):
    n, xi, trials = 3, 0.05, 2000
    limit = xi + 3 * math.sqrt(xi * (1 - xi) / trials)
    for name, pirate in PIRATES.items():
        rep = attack_mechanism(pirate, n, xi, trials, seed=45, coalition=coalition)
        assert rep.feasible_bot_rate == 0.0, name
        rates = rep.accusation_rates()
        for user in set(range(n)) - set(coalition):
            assert rates[user] <= limit, (name, user)


def test_pirates_are_feasible():
    rng = make_rng(5)
    book = fpc_gen(3, 0.05, rng)
    ws = list(book.codewords[:2])
    for name, pirate in PIRATES.items():
        assert is_feasible(pirate(ws, rng), ws), name
    assert not is_feasible(ws[0], [])


def test_constant_min_is_rarely_feasible():
    rep = attack_mechanism(constant_min, 3, 0.05, 2000, seed=46)
    assert rep.feasible_rate < 0.05
    # Trace never outputs bottom for this code: level-one trace always accuses user 0
    assert rep.bot_rate == 0.0


def test_rec_prefix_attack_spreads_accusations():
    def solver(data, rng):
        return rec_prefix(data, 0.1, 1.0, 0.1, rng, unsafe_utility=True)

    trials, xi = 300, 0.05
    rep = attack_mechanism(element_mechanism(solver), 3, xi, trials, seed=47)
    assert rep.accusation_rates()[2] <= xi + 3 * math.sqrt(xi * (1 - xi) / trials)


def test_exact_median_through_bits_view():
    def median(data, rng):
        rows = sorted(int(v) for v in data.rows)
        return rows[(len(rows) - 1) // 2]

    rep = attack_mechanism(element_mechanism(median), 3, 0.05, 500, seed=48)
    assert rep.feasible_rate == 1.0 and rep.trace_rate == 1.0 and rep.member_rate == 1.0


def test_truncated_code_is_flagged():
    book = fpc_gen(4, 0.05, make_rng(6), digit_budget=32)
    assert book.truncated and book.length == 32
    assert fpc_trace(book.codewords[3], book).accused == 3


def test_report_summary_and_reproducibility():
    a = attack_mechanism(PIRATES["random"], 3, 0.05, 50, seed=49)
    b = attack_mechanism(PIRATES["random"], 3, 0.05, 50, seed=49)
    assert a.records == b.records
    s = a.summary()
    assert s["trials"] == 50 and set(s["accusation_rates"]) == {0, 1, 2}
    with pytest.raises(ParameterError):
        attack_mechanism(PIRATES["min"], 3, 0.05, 5, seed=0, coalition=())
