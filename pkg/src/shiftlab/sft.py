"""Subshifts of finite type: validation, entropy, block recodings.

A shift space is presented by a 0/1 transition table over a finite
alphabet. Symbols are integers 0..A-1; admissible words are tuples of
symbols whose consecutive pairs are allowed transitions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySft, NonConvergence
from .spectral import (
    graph_period,
    is_strongly_connected,
    perron_eigendata,
    strongly_connected,
)

Word = tuple[int, ...]


@dataclass(frozen=True, eq=False)
class SftGraph:
    """A validated subshift of finite type.

    alphabet_size : number of symbols after pruning.
    allowed       : boolean table, allowed[i, j] true iff ij is admissible.
    transitive    : certified by strong connectivity of the digraph.
    mixing        : certified by gcd of cycle lengths equal to 1.
    symbols       : original labels of the surviving symbols (identity when
                    nothing was pruned).
    """

    alphabet_size: int
    allowed: np.ndarray
    transitive: bool
    mixing: bool
    symbols: tuple[int, ...] = field(default=())

    def __post_init__(self):
        self.allowed.setflags(write=False)
        if not self.symbols:
            object.__setattr__(self, "symbols", tuple(range(self.alphabet_size)))

    def same_graph(self, other: "SftGraph") -> bool:
        return self.alphabet_size == other.alphabet_size and bool(
            np.array_equal(self.allowed, other.allowed)
        )

    def __repr__(self):
        return (
            f"SftGraph(alphabet={self.alphabet_size}, transitive={self.transitive}, "
            f"mixing={self.mixing})"
        )


def validate_sft(raw_allowed) -> SftGraph:
    """Validate a raw transition table and prune stranded symbols.

    A symbol is stranded when it has no admissible successor or no
    admissible predecessor; pruning iterates until stable. Raises EmptySft
    when nothing survives.
    """
    allowed = np.asarray(raw_allowed, dtype=bool)
    if allowed.ndim != 2 or allowed.shape[0] != allowed.shape[1]:
        raise ValueError("transition table must be square")
    if allowed.shape[0] < 1:
        raise EmptySft("empty alphabet")
    keep = np.arange(allowed.shape[0])
    table = allowed
    while True:
        ok = table.any(axis=1) & table.any(axis=0)
        if ok.all():
            break
        keep = keep[ok]
        table = table[np.ix_(ok, ok)]
        if table.size == 0:
            raise EmptySft("pruning stranded symbols removed all symbols")
    transitive = is_strongly_connected(table)
    mixing = bool(transitive and graph_period(table) == 1)
    return SftGraph(
        alphabet_size=table.shape[0],
        allowed=table.copy(),
        transitive=transitive,
        mixing=mixing,
        symbols=tuple(int(s) for s in keep),
    )


def full_shift(alphabet_size: int) -> SftGraph:
    """The full shift on ``alphabet_size`` symbols."""
    return validate_sft(np.ones((alphabet_size, alphabet_size), dtype=bool))


def golden_mean_shift() -> SftGraph:
    """Two symbols, word 11 forbidden."""
    return validate_sft([[True, True], [True, False]])


def topological_entropy(sft: SftGraph, tol: float = 1e-13) -> float:
    """log of the Perron eigenvalue of the transition table, in nats.

    Power iteration with a Collatz-Wielandt convergence certificate, run
    per strongly connected component (the radius of a reducible table is
    the max over components).
    """
    adj = sft.allowed
    n_comp, labels = strongly_connected(adj)
    rho = 0.0
    for c in range(n_comp):
        idx = np.flatnonzero(labels == c)
        sub = adj[np.ix_(idx, idx)]
        if len(idx) == 1 and not sub[0, 0]:
            continue
        value, _, _ = perron_eigendata(sub.astype(float), tol=tol)
        rho = max(rho, value)
    if rho <= 0.0:
        raise NonConvergence("validated SFT must contain a cycle")
    return float(np.log(rho))


def admissible_words(sft: SftGraph, length: int) -> list[Word]:
    """All admissible words of the given length, in lexicographic order."""
    if length < 1:
        raise ValueError("length must be >= 1")
    a = sft.alphabet_size
    if length == 1:
        return [(s,) for s in range(a)]
    words: list[Word] = [(s,) for s in range(a)]
    for _ in range(length - 1):
        words = [
            w + (s,) for w in words for s in range(a) if sft.allowed[w[-1], s]
        ]
    return words


def is_admissible(sft: SftGraph, word: Word) -> bool:
    return all(sft.allowed[a, b] for a, b in zip(word, word[1:]))


def count_words(sft: SftGraph, length: int) -> int:
    """Number of admissible words of the given length (exact integer count)."""
    if length < 1:
        raise ValueError("length must be >= 1")
    counts = [1] * sft.alphabet_size
    mat = sft.allowed.astype(object)
    vec = np.array(counts, dtype=object)
    for _ in range(length - 1):
        vec = mat @ vec
    return int(vec.sum())


@dataclass(frozen=True, eq=False)
class BlockCoding:
    """Presentation of a shift on its admissible k-blocks.

    words are the admissible k-words in lexicographic order; the block graph
    has an edge u -> v iff u[1:] == v[:-1] (progressive overlap). Entropy is
    preserved by construction.
    """

    base: SftGraph
    order: int
    words: tuple[Word, ...]
    index: dict
    graph: SftGraph

    def word_of(self, state: int) -> Word:
        return self.words[state]

    def state_of(self, word: Word) -> int:
        return self.index[word]


def higher_block_recode(sft: SftGraph, order: int) -> BlockCoding:
    """Recode the shift so order-k words become single symbols.

    order = 1 returns the identity presentation.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    words = tuple(admissible_words(sft, order))
    index = {w: i for i, w in enumerate(words)}
    n = len(words)
    allowed = np.zeros((n, n), dtype=bool)
    if order == 1:
        allowed = sft.allowed.copy()
    else:
        for i, u in enumerate(words):
            suffix = u[1:]
            for s in range(sft.alphabet_size):
                if sft.allowed[u[-1], s]:
                    j = index.get(suffix + (s,))
                    if j is not None:
                        allowed[i, j] = True
    transitive = is_strongly_connected(allowed)
    mixing = bool(transitive and graph_period(allowed) == 1)
    graph = SftGraph(
        alphabet_size=n,
        allowed=allowed,
        transitive=transitive,
        mixing=mixing,
        symbols=tuple(range(n)),
    )
    return BlockCoding(base=sft, order=order, words=words, index=index, graph=graph)


def enumerate_words_array(sft: SftGraph, length: int, budget: int = 10_000_000):
    """Admissible words of a given length as a (count, length) int array.

    Raises BudgetExceeded when alphabet_size ** length exceeds the budget.
    """
    from .errors import BudgetExceeded

    if sft.alphabet_size**length > budget:
        raise BudgetExceeded(
            f"{sft.alphabet_size}**{length} exceeds enumeration budget {budget}"
        )
    arr = np.array([[s] for s in range(sft.alphabet_size)], dtype=np.int8)
    for _ in range(length - 1):
        blocks = []
        for s in range(sft.alphabet_size):
            ok = sft.allowed[arr[:, -1], s]
            if ok.any():
                ext = np.concatenate(
                    [arr[ok], np.full((int(ok.sum()), 1), s, dtype=np.int8)], axis=1
                )
                blocks.append(ext)
        arr = np.concatenate(blocks, axis=0)
    # lexicographic order
    order_keys = np.lexsort(arr.T[::-1])
    return arr[order_keys]
