"""Mixed integer/categorical search spaces and their index encoding."""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Sequence, Union

import numpy as np

from ..data import DataError


@dataclass(frozen=True)
class IntRange:
    name: str
    lo: int
    hi: int
    step: int = 1

    def __post_init__(self):
        if self.lo > self.hi:
            raise DataError(f"{self.name}: lo {self.lo} > hi {self.hi}")
        if self.step < 1:
            raise DataError(f"{self.name}: step must be >= 1")

    @property
    def n_values(self) -> int:
        return (self.hi - self.lo) // self.step + 1

    def value(self, index: int) -> int:
        return self.lo + int(index) * self.step

    def index(self, value) -> int:
        return (int(value) - self.lo) // self.step

    def contains(self, value) -> bool:
        return (isinstance(value, (int, np.integer)) and self.lo <= value <= self.hi
                and (value - self.lo) % self.step == 0)


@dataclass(frozen=True)
class Categorical:
    name: str
    values: tuple

    def __post_init__(self):
        if not self.values:
            raise DataError(f"{self.name}: categorical domain is empty")
        object.__setattr__(self, "values", tuple(self.values))

    @property
    def n_values(self) -> int:
        return len(self.values)

    def value(self, index: int):
        return self.values[int(index)]

    def index(self, value) -> int:
        return self.values.index(value)

    def contains(self, value) -> bool:
        return value in self.values


ParamSpec = Union[IntRange, Categorical]


class SearchSpace:
    """Ordered collection of parameter domains.

    Candidates are plain dicts ``{name: value}``. Every optimizer works on
    the index encoding: parameter ``d`` maps to ``0 .. n_values - 1``.
    """

    def __init__(self, params: Sequence[ParamSpec]):
        if not params:
            raise DataError("search space has no parameters")
        names = [p.name for p in params]
        if len(set(names)) != len(names):
            raise DataError("duplicate parameter names")
        self.params = tuple(params)
        self._n_values = np.array([p.n_values for p in self.params], dtype=np.int64)
        self._upper = (self._n_values - 1).astype(np.float64)
        self._span = np.where(self._upper > 0, self._upper, 1.0)

    def __repr__(self):
        return f"SearchSpace({list(self.params)!r})"

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.params]

    @property
    def dims(self) -> int:
        return len(self.params)

    @property
    def n_values(self) -> np.ndarray:
        return self._n_values.copy()

    @property
    def size(self) -> int:
        return prod(p.n_values for p in self.params)

    def upper(self) -> np.ndarray:
        """Largest index per dimension."""
        return self._upper.copy()

    def key(self, candidate: dict) -> tuple:
        return tuple(candidate[n] for n in self.names)

    def contains(self, candidate: dict) -> bool:
        return (set(candidate) == set(self.names)
                and all(p.contains(candidate[p.name]) for p in self.params))

    def from_indices(self, indices) -> dict:
        return {p.name: p.value(i) for p, i in zip(self.params, indices)}

    def to_indices(self, candidate: dict) -> np.ndarray:
        return np.array([p.index(candidate[p.name]) for p in self.params], dtype=np.int64)

    def decode(self, x) -> dict:
        """Round a continuous index vector and clamp it into the domain."""
        idx = np.clip(np.rint(np.asarray(x, dtype=np.float64)), 0, self._upper).astype(np.int64)
        return self.from_indices(idx)

    def normalized(self, candidate: dict) -> np.ndarray:
        """Index encoding scaled to [0, 1] per dimension."""
        return self.to_indices(candidate) / self._span

    def candidate_at(self, flat: int) -> dict:
        """Mixed-radix decoding of a flat index in ``range(self.size)``."""
        idx = []
        for p in reversed(self.params):
            flat, r = divmod(int(flat), p.n_values)
            idx.append(r)
        return self.from_indices(reversed(idx))

    def enumerate(self):
        for i in range(self.size):
            yield self.candidate_at(i)

    def sample(self, rng: np.random.Generator) -> dict:
        return self.from_indices(rng.integers(0, self._n_values))

    def sample_many(self, rng: np.random.Generator, n: int) -> list[dict]:
        return [self.from_indices(row) for row in rng.integers(0, self._n_values, size=(n, self.dims))]


def knn_space(lo: int = 1, hi: int = 29, step: int = 2) -> SearchSpace:
    """Odd neighbour counts 1..29 by default."""
    return SearchSpace([IntRange("knn_k", lo, hi, step)])


def rf_space(lo: int = 10, hi: int = 250, step: int = 1) -> SearchSpace:
    return SearchSpace([IntRange("rf_trees", lo, hi, step),
                        Categorical("rf_criterion", ("gini", "entropy"))])


def reference_space(variant: str) -> SearchSpace:
    if variant == "knn":
        return knn_space()
    if variant == "rf":
        return rf_space()
    raise DataError(f"unknown classifier variant {variant!r}")


def parse_range(text: str) -> tuple[int, int, int]:
    """``lo:hi`` or ``lo:hi:step``."""
    parts = [int(p) for p in text.split(":")]
    if len(parts) == 2:
        parts.append(1)
    if len(parts) != 3:
        raise DataError(f"bad integer range {text!r}")
    return parts[0], parts[1], parts[2]
