"""Locally constant functions on a shift space.

A function of order k reads the first k symbols of a sequence. Tables are
indexed by the admissible k-words of the ambient shift, in lexicographic
order (the same order ``higher_block_recode`` uses), so functions, measures
and transfer matrices all agree on state numbering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AlphabetMismatch
from .sft import SftGraph, Word, admissible_words


@dataclass(frozen=True, eq=False)
class LocallyConstantFunction:
    sft: SftGraph
    order: int
    words: tuple[Word, ...]
    values: np.ndarray
    role: str = "observable"

    def __post_init__(self):
        self.values.setflags(write=False)
        if len(self.words) != len(self.values):
            raise ValueError("value table does not cover the admissible words")
        if self.role == "roof" and float(self.values.min()) <= 0.0:
            raise ValueError(
                f"roof must be strictly positive, min value {self.values.min()}"
            )

    @property
    def _index(self) -> dict:
        idx = self.__dict__.get("_index_cache")
        if idx is None:
            idx = {w: i for i, w in enumerate(self.words)}
            self.__dict__["_index_cache"] = idx
        return idx

    def value(self, word: Word) -> float:
        """Value on any admissible word extending to at least ``order`` symbols."""
        return float(self.values[self._index[tuple(word[: self.order])]])

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())

    def lift(self, order: int) -> "LocallyConstantFunction":
        """Re-express on longer words (value depends only on the prefix)."""
        if order < self.order:
            raise ValueError("can only lift to a higher order")
        if order == self.order:
            return self
        words = tuple(admissible_words(self.sft, order))
        vals = np.array([self.value(w) for w in words])
        return LocallyConstantFunction(self.sft, order, words, vals, self.role)

    def _binary(self, other, op) -> "LocallyConstantFunction":
        if isinstance(other, LocallyConstantFunction):
            if not self.sft.same_graph(other.sft):
                raise AlphabetMismatch("functions live on different shifts")
            k = max(self.order, other.order)
            a, b = self.lift(k), other.lift(k)
            return LocallyConstantFunction(
                self.sft, k, a.words, op(a.values, b.values), "observable"
            )
        return LocallyConstantFunction(
            self.sft, self.order, self.words, op(self.values, float(other)), "observable"
        )

    def __add__(self, other):
        return self._binary(other, lambda x, y: x + y)

    def __sub__(self, other):
        return self._binary(other, lambda x, y: x - y)

    def __mul__(self, scalar):
        return LocallyConstantFunction(
            self.sft, self.order, self.words, self.values * float(scalar), "observable"
        )

    __rmul__ = __mul__

    def __neg__(self):
        return self * (-1.0)

    def with_role(self, role: str) -> "LocallyConstantFunction":
        return LocallyConstantFunction(self.sft, self.order, self.words, self.values.copy(), role)


def constant(sft: SftGraph, c: float, role: str = "observable") -> LocallyConstantFunction:
    words = tuple(admissible_words(sft, 1))
    return LocallyConstantFunction(sft, 1, words, np.full(len(words), float(c)), role)


def indicator(sft: SftGraph, word: Word) -> LocallyConstantFunction:
    """Indicator of the cylinder fixed by ``word``."""
    word = tuple(word)
    words = tuple(admissible_words(sft, len(word)))
    vals = np.array([1.0 if w == word else 0.0 for w in words])
    return LocallyConstantFunction(sft, len(word), words, vals)


def from_dict(sft: SftGraph, table: dict, role: str = "observable") -> LocallyConstantFunction:
    """Build from a {word: value} mapping covering all admissible words."""
    orders = {len(w) for w in table}
    if len(orders) != 1:
        raise ValueError("all words in the table must have the same length")
    order = orders.pop()
    words = tuple(admissible_words(sft, order))
    missing = [w for w in words if tuple(w) not in table]
    if missing:
        raise ValueError(f"table misses admissible words, e.g. {missing[0]}")
    vals = np.array([float(table[w]) for w in words])
    return LocallyConstantFunction(sft, order, words, vals, role)


def from_callable(sft: SftGraph, order: int, fn, role: str = "observable") -> LocallyConstantFunction:
    """Finite-order projection of a word-function.

    ``fn`` receives an admissible order-word; increasing ``order`` gives the
    standard increasing-order approximation of a continuous observable.
    """
    words = tuple(admissible_words(sft, order))
    vals = np.array([float(fn(w)) for w in words])
    return LocallyConstantFunction(sft, order, words, vals, role)
