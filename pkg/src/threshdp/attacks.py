"""Lower-bound machinery: the recursive hard distribution, the interior-point
fingerprinting code, and a runner that traces mechanisms through the code.

Words are base-b digit strings, most significant digit first (index 0).
Sizes grow as towers: S(j+1) = b(j)^S(j). Any level whose digit count
exceeds the digit budget is truncated, and the result is flagged.
"""
from __future__ import annotations

import functools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .domain import Dataset, OrderedDomain
from .errors import DomainError, ParameterError, TowerOverflowError
from .primitives import RandomSource, trial_rng

DEFAULT_DIGIT_BUDGET = 4096
SIZE_BIT_BUDGET = 1 << 16


@functools.total_ordering
@dataclass(frozen=True)
class MixedRadixWord:
    digits: tuple
    radix: int

    def __post_init__(self):
        if self.radix < 2:
            raise DomainError("radix must be >= 2")
        digits = tuple(int(d) for d in self.digits)
        if any(d < 0 or d >= self.radix for d in digits):
            raise DomainError(f"digit outside [0, {self.radix})")
        object.__setattr__(self, "digits", digits)

    def __len__(self) -> int:
        return len(self.digits)

    def _check_peer(self, other: "MixedRadixWord"):
        if other.radix != self.radix or len(other) != len(self):
            raise DomainError("words differ in radix or length")

    def __lt__(self, other: "MixedRadixWord") -> bool:
        self._check_peer(other)
        return self.digits < other.digits

    @property
    def value(self) -> int:
        v = 0
        for d in self.digits:
            v = v * self.radix + d
        return v

    @classmethod
    def from_value(cls, value: int, radix: int, length: int) -> "MixedRadixWord":
        if value < 0 or (length < 4096 and value >= radix**length):
            raise DomainError(f"{value} does not fit in {length} base-{radix} digits")
        digits = []
        for _ in range(length):
            value, d = divmod(value, radix)
            digits.append(d)
        if value:
            raise DomainError("value does not fit")
        return cls(tuple(reversed(digits)), radix)

    def agreement(self, other: "MixedRadixWord") -> int:
        """Number of leading digits shared with ``other``."""
        self._check_peer(other)
        for i, (a, b) in enumerate(zip(self.digits, other.digits)):
            if a != b:
                return i
        return len(self.digits)

    @property
    def bits_per_digit(self) -> int:
        return (self.radix - 1).bit_length()

    def to_bits(self) -> int:
        """Order-preserving embedding as an integer of len * bits_per_digit bits."""
        w = self.bits_per_digit
        v = 0
        for d in self.digits:
            v = (v << w) | d
        return v

    @classmethod
    def from_bits(cls, x: int, radix: int, length: int) -> "MixedRadixWord":
        """Largest word whose embedding is <= x (a monotone projection)."""
        w = (radix - 1).bit_length()
        mask = (1 << w) - 1
        chunks = [(x >> (w * (length - 1 - i))) & mask for i in range(length)]
        for i, c in enumerate(chunks):
            if c >= radix:
                chunks[i:] = [radix - 1] * (length - i)
                break
        return cls(tuple(chunks), radix)


def _random_digits(rng: RandomSource, radix: int, count: int) -> tuple:
    return tuple(rng.integers(0, radix, size=count).tolist()) if count > 0 else ()


def _agreeing_word(base: MixedRadixWord, prefix: int, rng: RandomSource) -> MixedRadixWord:
    """Word equal to ``base`` on the first ``prefix`` digits, random afterwards."""
    prefix = min(prefix, len(base))
    return MixedRadixWord(base.digits[:prefix] + _random_digits(rng, base.radix, len(base) - prefix),
                          base.radix)


def _diverging_word(base: MixedRadixWord, prefix: int, rng: RandomSource) -> MixedRadixWord:
    """Like ``_agreeing_word`` but the agreement with ``base`` is exactly ``prefix``."""
    word = _agreeing_word(base, prefix, rng)
    if prefix >= len(base):
        return word
    # shift by a nonzero offset so the digit after the prefix is uniform over the others
    digit = (base.digits[prefix] + 1 + int(rng.integers(0, base.radix - 1))) % base.radix
    digits = word.digits[:prefix] + (digit,) + word.digits[prefix + 1:]
    return MixedRadixWord(digits, base.radix)


def _tower_sizes(radix_of: Callable[[int], int], first: int, n: int,
                 max_bits: int = SIZE_BIT_BUDGET) -> list:
    """[S(1), ..., S(n)] with S(j+1) = radix_of(j) ** S(j)."""
    sizes = [first]
    for j in range(1, n):
        s = sizes[-1]
        bits = s * math.log2(radix_of(j))
        if bits > max_bits:
            raise TowerOverflowError(f"S({j + 1}) has about 2^{math.log2(bits):.1f} bits")
        sizes.append(radix_of(j) ** s)
    return sizes


def _digit_count(radix_of, first: int, level: int, budget: int) -> tuple[int, bool]:
    """Digits per word at ``level`` (= S(level-1)), capped at ``budget``."""
    try:
        s = _tower_sizes(radix_of, first, level - 1)[-1]
    except TowerOverflowError:
        return budget, True
    return (s, False) if s <= budget else (budget, True)


# -- hard distribution ------------------------------------------------------

def default_delta(j: int) -> float:
    return 1 / (50 * j * j)


@dataclass(frozen=True)
class HardDistParams:
    delta_schedule: Callable[[int], float] = default_delta
    digit_budget: int = DEFAULT_DIGIT_BUDGET

    def b(self, j: int) -> int:
        return round(1 / self.delta_schedule(j))

    def sizes(self, n: int, max_bits: int = SIZE_BIT_BUDGET) -> list:
        return _tower_sizes(self.b, 2, n, max_bits)

    def S(self, n: int, max_bits: int = SIZE_BIT_BUDGET) -> int:
        return self.sizes(n, max_bits)[-1]

    def P(self, n: int, eps: float) -> float:
        """Success-probability cap for (eps, delta(n))-DP mechanisms at level n."""
        e = math.exp(eps)
        return e / (e + 1) + (e + 1) * sum(self.delta_schedule(j) for j in range(1, n + 1))


@dataclass(frozen=True)
class HardDatabase:
    level: int
    rows: tuple
    agreements: tuple = ()
    truncated: bool = False

    @property
    def radix(self) -> int:
        return self.rows[0].radix

    def as_dataset(self) -> Dataset:
        width = max(1, len(self.rows[0]) * self.rows[0].bits_per_digit)
        return Dataset(OrderedDomain(width), [w.to_bits() for w in self.rows])


def hard_dist_sample(n: int, params: HardDistParams, rng: RandomSource) -> HardDatabase:
    """Database of n rows over [S(n)] drawn from the recursive hard distribution."""
    if n < 1:
        raise ParameterError("level must be >= 1")
    if n == 1:
        return HardDatabase(1, (MixedRadixWord((int(rng.integers(0, 2)),), 2),))
    inner = hard_dist_sample(n - 1, params, rng)
    length, cut = _digit_count(params.b, 2, n, params.digit_budget)
    xs = tuple(min(w.value, length) for w in inner.rows)
    y0 = MixedRadixWord(_random_digits(rng, params.b(n - 1), length), params.b(n - 1))
    rows = (y0,) + tuple(_agreeing_word(y0, x, rng) for x in xs)
    return HardDatabase(n, rows, xs, cut or inner.truncated)


# -- interior-point fingerprinting code -------------------------------------

def fpc_radix(j: int, xi: float) -> int:
    return math.ceil(2 * j * j / xi - 1e-9)


def fpc_sizes(n: int, xi: float, max_bits: int = SIZE_BIT_BUDGET) -> list:
    return _tower_sizes(lambda j: fpc_radix(j, xi), 1, n, max_bits)


@dataclass(frozen=True)
class Codebook:
    """Codewords of one level plus the nested codebook that Trace recurses into."""

    level: int
    xi: float
    codewords: tuple
    inner: "Codebook | None" = None
    truncated: bool = False

    @property
    def radix(self) -> int:
        return self.codewords[0].radix

    @property
    def length(self) -> int:
        return len(self.codewords[0])


@dataclass(frozen=True)
class TraceOutcome:
    accused: int | None

    @property
    def failed(self) -> bool:
        return self.accused is None


def fpc_gen(n: int, xi: float, rng: RandomSource,
            digit_budget: int = DEFAULT_DIGIT_BUDGET) -> Codebook:
    """Codebook for n users (indexed 0..n-1) with soundness error below xi."""
    if n < 1 or not 0 < xi < 1:
        raise ParameterError("need n >= 1 and 0 < xi < 1")
    if n == 1:
        return Codebook(1, xi, (MixedRadixWord((), 2),))
    inner = fpc_gen(n - 1, xi, rng, digit_budget)
    radix = fpc_radix(n - 1, xi)
    length, cut = _digit_count(lambda j: fpc_radix(j, xi), 1, n, digit_budget)
    last = MixedRadixWord(_random_digits(rng, radix, length), radix)
    words = tuple(_diverging_word(last, min(w.value, length), rng) for w in inner.codewords)
    return Codebook(n, xi, words + (last,), inner, cut or inner.truncated)


def _inner_word(agree: int, inner: Codebook) -> MixedRadixWord:
    if inner.level == 1:
        return inner.codewords[0]
    cap = inner.radix ** inner.length - 1 if inner.length < 4096 else agree
    return MixedRadixWord.from_value(min(agree, cap), inner.radix, inner.length)


def fpc_trace(word: MixedRadixWord, book: Codebook) -> TraceOutcome:
    """Accuse the newest user if ``word`` tracks their codeword further than
    anyone else's does; otherwise recurse on the agreement length."""
    if book.level == 1:
        return TraceOutcome(0)
    if word.radix != book.radix or len(word) != book.length:
        raise DomainError(f"expected {book.length} base-{book.radix} digits")
    newest = book.codewords[-1]
    best = max(w.agreement(newest) for w in book.codewords[:-1])
    agree = word.agreement(newest)
    # a full match is only possible through the newest user's own codeword
    if agree > best or agree == book.length:
        return TraceOutcome(book.level - 1)
    return fpc_trace(_inner_word(agree, book.inner), book.inner)


def is_feasible(word: MixedRadixWord, coalition: Sequence[MixedRadixWord]) -> bool:
    return bool(coalition) and min(coalition) <= word <= max(coalition)


# -- pirates and mechanisms -------------------------------------------------

def _median(words, rng):
    return sorted(words)[(len(words) - 1) // 2]


def _midpoint(words, rng):
    lo, hi = min(words), max(words)
    return MixedRadixWord.from_value((lo.value + hi.value) // 2, lo.radix, len(lo))


PIRATES: dict[str, Callable] = {
    "min": lambda words, rng: min(words),
    "max": lambda words, rng: max(words),
    "median": _median,
    "random": lambda words, rng: words[int(rng.integers(0, len(words)))],
    "midpoint": _midpoint,
}


def coordinate_median(words, rng=None) -> MixedRadixWord:
    cols = zip(*(w.digits for w in words))
    return MixedRadixWord(tuple(sorted(c)[(len(c) - 1) // 2] for c in cols), words[0].radix)


def constant_min(words, rng=None) -> MixedRadixWord:
    return MixedRadixWord((0,) * len(words[0]), words[0].radix)


def element_mechanism(solver: Callable[[Dataset, RandomSource], int]) -> Callable:
    """Run a mechanism on bit-string elements and project its output back to words."""

    def mech(words, rng):
        w0 = words[0]
        width = max(1, len(w0) * w0.bits_per_digit)
        x = solver(Dataset(OrderedDomain(width), [w.to_bits() for w in words]), rng)
        return MixedRadixWord.from_bits(int(x), w0.radix, len(w0))

    return mech


@dataclass
class AttackReport:
    users: int
    xi: float
    trials: int
    coalition: tuple
    records: list = field(default_factory=list, repr=False)

    def _rate(self, pred) -> float:
        return sum(1 for r in self.records if pred(r)) / max(1, len(self.records))

    @property
    def feasible_rate(self) -> float:
        return self._rate(lambda r: r[1])

    @property
    def bot_rate(self) -> float:
        return self._rate(lambda r: r[2] is None)

    @property
    def trace_rate(self) -> float:
        return 1 - self.bot_rate

    @property
    def member_rate(self) -> float:
        return self._rate(lambda r: r[2] in self.coalition)

    @property
    def feasible_bot_rate(self) -> float:
        return self._rate(lambda r: r[1] and r[2] is None)

    def accusation_rates(self) -> dict:
        counts = Counter(r[2] for r in self.records)
        return {u: counts.get(u, 0) / max(1, len(self.records)) for u in range(self.users)}

    def summary(self) -> dict:
        return {"users": self.users, "xi": self.xi, "trials": self.trials,
                "feasible_rate": self.feasible_rate, "trace_rate": self.trace_rate,
                "bot_rate": self.bot_rate, "member_rate": self.member_rate,
                "accusation_rates": self.accusation_rates()}


def attack_mechanism(mech: Callable, n: int, xi: float, trials: int, seed: int,
                     coalition: Sequence[int] | None = None,
                     digit_budget: int = DEFAULT_DIGIT_BUDGET) -> AttackReport:
    """Feed a coalition's codewords to ``mech`` and trace what comes out.

    The default coalition is every user but the last. Each trial uses its
    own stream derived from (seed, trial).
    """
    coalition = tuple(range(n - 1)) if coalition is None else tuple(coalition)
    if not coalition:
        raise ParameterError("the coalition must be non-empty")
    report = AttackReport(n, xi, trials, coalition)
    for t in range(trials):
        rng = trial_rng(seed, t)
        book = fpc_gen(n, xi, rng, digit_budget)
        words = [book.codewords[i] for i in coalition]
        out = mech(words, rng)
        report.records.append((t, is_feasible(out, words), fpc_trace(out, book).accused))
    return report
