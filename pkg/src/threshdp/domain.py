"""Ordered bit-string domains, datasets and prefix arithmetic.

Elements of a width-``d`` domain are the integers ``[0, 2**d)``. Rows are
kept in ``uint64`` arrays when ``d <= 64`` and in object arrays of Python
ints otherwise, so comparisons stay numeric in both cases.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from . import kernels
from .errors import DomainError, TowerOverflowError

DEFAULT_BASE_CASE = 32
MACHINE_WIDTH = 64


@dataclass(frozen=True)
class OrderedDomain:
    bit_width: int
    base_case_threshold: int = DEFAULT_BASE_CASE

    def __post_init__(self):
        if int(self.bit_width) < 1:
            raise DomainError(f"bit_width must be >= 1, got {self.bit_width}")
        # smaller thresholds make the child width stop shrinking (2 -> 2)
        if self.base_case_threshold < 4:
            raise DomainError("base_case_threshold must be >= 4")

    @property
    def size(self) -> int:
        return 1 << self.bit_width

    @property
    def min_element(self) -> int:
        return 0

    @property
    def max_element(self) -> int:
        return (1 << self.bit_width) - 1

    @property
    def machine(self) -> bool:
        """True when rows fit in uint64."""
        return self.bit_width <= MACHINE_WIDTH

    @property
    def dtype(self):
        return np.uint64 if self.machine else object

    def child(self) -> "OrderedDomain":
        """Domain of lcp lengths {0, ..., d} used one level down in RecPrefix."""
        return OrderedDomain(self.bit_width.bit_length(), self.base_case_threshold)

    def contains(self, x) -> bool:
        return 0 <= int(x) <= self.max_element

    def check(self, x) -> int:
        x = int(x)
        if not 0 <= x <= self.max_element:
            raise DomainError(f"{x} is outside [0, 2^{self.bit_width})")
        return x

    def as_array(self, values: Iterable) -> np.ndarray:
        """Validate values and pack them in this domain's row dtype."""
        if isinstance(values, np.ndarray) and values.dtype.kind in "iu" and self.machine:
            if values.size and (int(values.min()) < 0 or int(values.max()) > self.max_element):
                raise DomainError(f"row outside [0, 2^{self.bit_width})")
            return values.astype(np.uint64, copy=False)
        vals = [int(v) for v in values]
        if vals and (min(vals) < 0 or max(vals) > self.max_element):
            raise DomainError(f"row outside [0, 2^{self.bit_width})")
        if self.machine:
            return np.array(vals, dtype=np.uint64)
        arr = np.empty(len(vals), dtype=object)
        arr[:] = vals
        return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """A multiset of domain elements; one row is the unit of privacy."""

    domain: OrderedDomain
    rows: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "rows", self.domain.as_array(self.rows))

    @classmethod
    def from_values(cls, values: Iterable, width: int, **kw) -> "Dataset":
        return cls(OrderedDomain(width, **kw), values)

    def __len__(self) -> int:
        return len(self.rows)

    @functools.cached_property
    def sorted_rows(self) -> np.ndarray:
        return np.sort(self.rows, kind="stable")

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.domain == other.domain and np.array_equal(self.rows, other.rows)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    domain: OrderedDomain
    rows: np.ndarray = field(repr=False)
    labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "rows", self.domain.as_array(self.rows))
        labels = np.asarray(self.labels, dtype=np.int8)
        if labels.shape != (len(self.rows),):
            raise DomainError("labels and rows differ in length")
        if labels.size and not np.isin(labels, (0, 1)).all():
            raise DomainError("labels must be 0 or 1")
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.rows)

    __hash__ = None


def lcp_length(x, y, domain: OrderedDomain) -> int:
    """Number of leading bits on which x and y agree as d-bit strings."""
    x, y = domain.check(x), domain.check(y)
    return domain.bit_width - (x ^ y).bit_length()


def lcp_lengths(a: np.ndarray, b: np.ndarray, domain: OrderedDomain) -> np.ndarray:
    """Vectorized lcp_length over aligned row arrays."""
    if domain.machine:
        return kernels.pair_lcp(a, b, domain.bit_width)
    d = domain.bit_width
    return np.fromiter(((d - (int(u) ^ int(v)).bit_length()) for u, v in zip(a, b)),
                       dtype=np.int64, count=len(a))


def _parse_prefix(prefix) -> tuple[int, int]:
    if isinstance(prefix, str):
        if prefix.strip("01"):
            raise DomainError(f"prefix must be a bit string, got {prefix!r}")
        return (int(prefix, 2) if prefix else 0), len(prefix)
    value, length = prefix
    if length < 0 or int(value) >> length:
        raise DomainError(f"prefix value {value} does not fit in {length} bits")
    return int(value), int(length)


def extend_prefix(prefix, fill: int, domain: OrderedDomain) -> int:
    """The prefix followed by d - len(prefix) copies of ``fill``.

    ``prefix`` is a bit string such as ``"01"`` or a ``(value, length)`` pair.
    """
    value, length = _parse_prefix(prefix)
    if length > domain.bit_width:
        raise DomainError(f"prefix of length {length} exceeds width {domain.bit_width}")
    if fill not in (0, 1):
        raise DomainError("fill must be 0 or 1")
    rest = domain.bit_width - length
    return (value << rest) | (((1 << rest) - 1) if fill else 0)


def prefix_of(x, length: int, domain: OrderedDomain) -> int:
    if not 0 <= length <= domain.bit_width:
        raise DomainError(f"prefix length {length} outside [0, {domain.bit_width}]")
    return domain.check(x) >> (domain.bit_width - length)


def recursion_depth(domain: OrderedDomain) -> int:
    """Number of RecPrefix levels run on this domain."""
    depth, d = 1, domain.bit_width
    while (1 << d) > domain.base_case_threshold:
        d = d.bit_length()
        depth += 1
    return depth


DEFAULT_TOWER_BITS = 1 << 20


def tower(k: int, x: int, max_bits: int = DEFAULT_TOWER_BITS) -> int:
    """Iterated exponential: tower(0, x) = x, tower(k, x) = 2 ** tower(k-1, x)."""
    if k < 0:
        raise ValueError("k must be non-negative")
    v = int(x)
    for _ in range(k):
        if v >= max_bits:
            raise TowerOverflowError(f"2^v with v of {v.bit_length()} bits exceeds the {max_bits}-bit budget")
        v = 1 << v
    return v


def log_star(x: float) -> int:
    """Iterated base-2 logarithm count until the value drops to at most 1."""
    n = 0
    while x > 1:
        x = math.log2(x)
        n += 1
    return n


def _parse_int(tok: str) -> int:
    tok = tok.strip()
    return int(tok, 16) if tok.lower().startswith("0x") else int(tok, 10)


def _lines(path):
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line


def read_dataset(path, width: int) -> Dataset:
    """Load newline-delimited unsigned integers (decimal or 0x hex)."""
    domain = OrderedDomain(width)
    try:
        values = [_parse_int(line) for line in _lines(path)]
    except ValueError as exc:
        raise DomainError(f"{path}: {exc}") from None
    return Dataset(domain, values)


def read_labeled_dataset(path, width: int) -> LabeledDataset:
    """Load "value,label" lines."""
    domain = OrderedDomain(width)
    values, labels = [], []
    for line in _lines(path):
        try:
            v, lab = line.split(",")
            values.append(_parse_int(v))
            labels.append(int(lab))
        except ValueError:
            raise DomainError(f"{path}: bad labeled row {line!r}") from None
    return LabeledDataset(domain, values, labels)


def write_dataset(path, data: Dataset) -> None:
    Path(path).write_text("".join(f"{int(v)}\n" for v in data.rows))
