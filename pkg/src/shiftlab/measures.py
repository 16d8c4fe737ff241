"""Stationary Markov measures on SFTs, cylinder marginals, the weak* metric.

Measures of order k are stored as order-1 chains on the k-block recoding
(single code path for every order). Order 0 marks a Bernoulli product
measure; internally it is kept as an order-1 chain with identical rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AlphabetMismatch,
    NotErgodic,
    NotTransitive,
    OrderMismatch,
    SupportMismatch,
)
from .sft import SftGraph, Word, higher_block_recode
from .spectral import is_strongly_connected, perron_eigendata

ROW_SUM_TOL = 1e-12
STATIONARITY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class MarkovMeasure:
    """Stationary Markov chain over the admissible k-blocks of an SFT.

    order       : declared order (0 = Bernoulli, 1 = edge Markov, ...).
    states      : admissible words of length max(order, 1), lexicographic.
    transition  : row-stochastic table over states.
    stationary  : left-invariant probability vector.
    ergodic     : certified by irreducibility of the support digraph.
    """

    sft: SftGraph
    order: int
    states: tuple[Word, ...]
    transition: np.ndarray
    stationary: np.ndarray
    ergodic: bool

    def __post_init__(self):
        self.transition.setflags(write=False)
        self.stationary.setflags(write=False)

    @property
    def block_order(self) -> int:
        return max(self.order, 1)

    @property
    def state_index(self) -> dict:
        idx = self.__dict__.get("_state_index")
        if idx is None:
            idx = {w: i for i, w in enumerate(self.states)}
            self.__dict__["_state_index"] = idx
        return idx

    def __repr__(self):
        return (
            f"MarkovMeasure(order={self.order}, states={len(self.states)}, "
            f"ergodic={self.ergodic})"
        )


def _validate_chain(
    sft: SftGraph,
    states: tuple[Word, ...],
    transition: np.ndarray,
    stationary: np.ndarray,
) -> bool:
    """Check stochasticity, stationarity and admissible support; return ergodic flag."""
    rows = transition.sum(axis=1)
    if np.abs(rows - 1.0).max() > ROW_SUM_TOL * 10:
        raise ValueError(f"rows must sum to 1, max deviation {np.abs(rows-1).max():.3e}")
    if np.abs(stationary @ transition - stationary).max() > STATIONARITY_TOL:
        raise ValueError("stationary vector is not left-invariant")
    support = transition > 0.0
    for i, u in enumerate(states):
        for j in np.flatnonzero(support[i]):
            v = states[int(j)]
            if u[1:] != v[:-1] or not sft.allowed[u[-1], v[-1]]:
                raise SupportMismatch(
                    f"transition {u} -> {v} leaves the admissible words"
                )
    live = stationary > 0.0
    sub = support[np.ix_(np.flatnonzero(live), np.flatnonzero(live))]
    return bool(is_strongly_connected(sub)) if live.any() else False


def markov_measure(
    sft: SftGraph,
    transition,
    order: int = 1,
    stationary=None,
) -> MarkovMeasure:
    """Build a measure of the given order from a row-stochastic table.

    ``transition`` is indexed by the admissible order-blocks (lexicographic).
    The stationary vector is computed from Perron data when not supplied.
    """
    coding = higher_block_recode(sft, max(order, 1))
    P = np.asarray(transition, dtype=float)
    if P.shape != (len(coding.words),) * 2:
        raise ValueError(
            f"transition must be {len(coding.words)}x{len(coding.words)} "
            f"over the admissible {max(order,1)}-blocks"
        )
    if stationary is None:
        support = P > 0
        if not is_strongly_connected(support):
            raise NotErgodic(
                "support is reducible; supply an explicit stationary vector"
            )
        _, _, left = perron_eigendata(P)
        pi = left / left.sum()
    else:
        pi = np.asarray(stationary, dtype=float)
        pi = pi / pi.sum()
    ergodic = _validate_chain(sft, coding.words, P, pi)
    return MarkovMeasure(
        sft=sft,
        order=order,
        states=coding.words,
        transition=P,
        stationary=pi,
        ergodic=ergodic,
    )


def bernoulli_measure(sft: SftGraph, probs) -> MarkovMeasure:
    """Product measure with the given symbol probabilities (order 0)."""
    p = np.asarray(probs, dtype=float)
    if p.shape != (sft.alphabet_size,):
        raise ValueError("one probability per symbol required")
    if abs(p.sum() - 1.0) > ROW_SUM_TOL * 10:
        raise ValueError("probabilities must sum to 1")
    required = sft.allowed[np.ix_(p > 0, p > 0)]
    if not required.all():
        raise SupportMismatch("product measure charges a forbidden transition")
    P = np.tile(p, (sft.alphabet_size, 1))
    ergodic = _validate_chain(sft, tuple((s,) for s in range(sft.alphabet_size)), P, p)
    return MarkovMeasure(
        sft=sft,
        order=0,
        states=tuple((s,) for s in range(sft.alphabet_size)),
        transition=P,
        stationary=p.copy(),
        ergodic=ergodic,
    )


def parry_measure(sft: SftGraph) -> MarkovMeasure:
    """Measure of maximal entropy of a transitive SFT.

    Built from the Perron eigendata of the 0/1 table: P_ij = A_ij r_j/(lam r_i),
    pi_i proportional to l_i r_i.
    """
    if not sft.transitive:
        raise NotTransitive("Parry measure requires a transitive SFT")
    lam, right, left = perron_eigendata(sft.allowed.astype(float))
    a = sft.allowed.astype(float)
    P = a * right[None, :] / (lam * right[:, None])
    P /= P.sum(axis=1, keepdims=True)  # remove rounding drift
    pi = left * right
    pi /= pi.sum()
    ergodic = _validate_chain(sft, tuple((s,) for s in range(sft.alphabet_size)), P, pi)
    return MarkovMeasure(
        sft=sft,
        order=1,
        states=tuple((s,) for s in range(sft.alphabet_size)),
        transition=P,
        stationary=pi,
        ergodic=ergodic,
    )


def markov_entropy(m: MarkovMeasure) -> float:
    """Entropy rate -sum_i pi_i sum_j P_ij log P_ij with 0 log 0 = 0 (nats)."""
    P = m.transition
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(P > 0.0, P * np.log(P), 0.0)
    return float(-(m.stationary @ plogp.sum(axis=1)))


def marginal_table(m: MarkovMeasure, depth: int) -> dict:
    """Exact cylinder probabilities {word: mass} at the given depth."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    k = m.block_order
    if depth <= k:
        out: dict = {}
        for i, w in enumerate(m.states):
            key = w[:depth]
            out[key] = out.get(key, 0.0) + float(m.stationary[i])
        return {w: p for w, p in out.items() if p > 0.0 or depth <= k}
    # extend one symbol at a time through the chain
    current = {w: (i, float(m.stationary[i])) for i, w in enumerate(m.states)}
    words = {w: p for w, (i, p) in current.items()}
    frontier = {w: (i, p) for w, (i, p) in current.items()}
    for _ in range(depth - k):
        nxt: dict = {}
        for w, (i, p) in frontier.items():
            if p == 0.0:
                continue
            row = m.transition[i]
            for j in np.flatnonzero(row > 0.0):
                v = m.states[int(j)]
                nxt[w + (v[-1],)] = (int(j), p * float(row[j]))
        frontier = nxt
    return {w: p for w, (i, p) in frontier.items()}


def word_probability(m: MarkovMeasure, word: Word) -> float:
    """Mass of the cylinder fixed by ``word``."""
    word = tuple(word)
    k = m.block_order
    if len(word) <= k:
        return float(
            sum(p for w, p in marginal_table(m, len(word)).items() if w == word)
        )
    idx = m.state_index
    start = word[:k]
    if start not in idx:
        return 0.0
    i = idx[start]
    p = float(m.stationary[i])
    for pos in range(k, len(word)):
        nxt = word[pos - k + 1 : pos + 1]
        if nxt not in idx:
            return 0.0
        j = idx[nxt]
        p *= float(m.transition[i, j])
        if p == 0.0:
            return 0.0
        i = j
    return p


@dataclass(frozen=True, eq=False)
class CylinderMarginals:
    """Per-length cylinder frequency tables, lengths 1..depth."""

    alphabet_size: int
    depth: int
    tables: tuple[dict, ...]

    def table(self, length: int) -> dict:
        return self.tables[length - 1]

    def consistency_error(self) -> float:
        """Max deviation between a table and the one-sided marginal of the next."""
        worst = 0.0
        for k in range(self.depth - 1):
            shorter, longer = self.tables[k], self.tables[k + 1]
            folded: dict = {}
            for w, p in longer.items():
                folded[w[:-1]] = folded.get(w[:-1], 0.0) + p
            keys = set(shorter) | set(folded)
            worst = max(
                worst,
                max(abs(shorter.get(w, 0.0) - folded.get(w, 0.0)) for w in keys),
            )
        return worst

    def shift_invariance_error(self) -> float:
        """Max deviation between left and right one-symbol marginals."""
        worst = 0.0
        for k in range(1, self.depth):
            longer = self.tables[k]
            left: dict = {}
            right: dict = {}
            for w, p in longer.items():
                right[w[:-1]] = right.get(w[:-1], 0.0) + p
                left[w[1:]] = left.get(w[1:], 0.0) + p
            keys = set(left) | set(right)
            worst = max(
                worst, max(abs(left.get(w, 0.0) - right.get(w, 0.0)) for w in keys)
            )
        return worst


def cylinder_marginals(m: MarkovMeasure, depth: int) -> CylinderMarginals:
    tables = tuple(marginal_table(m, k) for k in range(1, depth + 1))
    return CylinderMarginals(m.sft.alphabet_size, depth, tables)


def marginals_from_tables(alphabet_size: int, tables: list[dict]) -> CylinderMarginals:
    clean = tuple(
        {tuple(w): float(p) for w, p in t.items() if p != 0.0} for t in tables
    )
    return CylinderMarginals(alphabet_size, len(clean), clean)


def mixture_marginals(
    components: list[CylinderMarginals], weights: list[float]
) -> CylinderMarginals:
    """Convex combination of marginal systems (common depth, common alphabet)."""
    depth = min(c.depth for c in components)
    alphabet = components[0].alphabet_size
    if any(c.alphabet_size != alphabet for c in components):
        raise AlphabetMismatch("mixture components over different alphabets")
    tables = []
    for k in range(1, depth + 1):
        acc: dict = {}
        for c, w in zip(components, weights):
            for word, p in c.table(k).items():
                acc[word] = acc.get(word, 0.0) + w * p
        tables.append(acc)
    return marginals_from_tables(alphabet, tables)


def integrate(m: MarkovMeasure, f) -> float:
    """Integral of a locally constant function: sum over k-words of mu[w] f(w)."""
    if not m.sft.same_graph(f.sft):
        raise OrderMismatch("function is defined over a different shift")
    table = marginal_table(m, f.order)
    return float(sum(p * f.value(w) for w, p in table.items()))


def dstar_distance(a: CylinderMarginals, b: CylinderMarginals) -> float:
    """Weighted cylinder-variation metric compatible with the weak* topology.

    d(a, b) = sum_{k=1..D} 2^-k A^-k sum_{|w|=k} |a[w] - b[w]| computed to the
    common depth D. The tail past depth D is bounded by
    ``dstar_truncation_bound``; the metric is translation invariant because
    every term is a difference of linear functionals.
    """
    if a.alphabet_size != b.alphabet_size:
        raise AlphabetMismatch("marginals over different alphabets")
    depth = min(a.depth, b.depth)
    total = 0.0
    for k in range(1, depth + 1):
        ta, tb = a.table(k), b.table(k)
        keys = set(ta) | set(tb)
        level = sum(abs(ta.get(w, 0.0) - tb.get(w, 0.0)) for w in keys)
        total += level / (2.0**k * float(a.alphabet_size) ** k)
    return total


def dstar_truncation_bound(depth: int, alphabet_size: int, sharp: bool = False) -> float:
    """Upper bound on the contribution of cylinders deeper than ``depth``.

    The coarse bound 2^(1-D) uses only sum |a-b| <= 2 per level; the sharp
    bound keeps the A^-k weight: 2 (2A)^-D / (2A - 1).
    """
    if sharp:
        q = 2.0 * alphabet_size
        return 2.0 * q ** (-depth) / (q - 1.0)
    return 2.0 ** (1 - depth)


def measure_dstar(x: MarkovMeasure, y: MarkovMeasure, depth: int = 12) -> float:
    return dstar_distance(cylinder_marginals(x, depth), cylinder_marginals(y, depth))


def lift_measure(m: MarkovMeasure, block_order: int) -> MarkovMeasure:
    """Re-express the measure on longer blocks (same process, higher order).

    The lifted chain has states the positive-mass words of the new length and
    the original conditional law of the next symbol; entropy and all cylinder
    marginals are unchanged.
    """
    k = m.block_order
    if block_order < k:
        raise ValueError("can only lift to a higher block order")
    if block_order == k:
        return m
    table = marginal_table(m, block_order)
    states = tuple(sorted(w for w, p in table.items() if p > 0.0))
    index = {w: i for i, w in enumerate(states)}
    pi = np.array([table[w] for w in states])
    pi = pi / pi.sum()
    P = np.zeros((len(states), len(states)))
    for i, w in enumerate(states):
        tail = w[-k:]
        src = m.state_index[tail]
        for j in np.flatnonzero(m.transition[src] > 0.0):
            nxt_block = m.states[int(j)]
            target = w[1:] + (nxt_block[-1],)
            t = index.get(target)
            if t is not None:
                P[i, t] = float(m.transition[src, int(j)])
    P /= P.sum(axis=1, keepdims=True)
    ergodic = _validate_chain(m.sft, states, P, pi)
    return MarkovMeasure(
        sft=m.sft,
        order=block_order,
        states=states,
        transition=P,
        stationary=pi,
        ergodic=ergodic,
    )


def stream_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for (seed, stream) pairs.

    Philox keyed on both integers: trial streams are reproducible no matter
    how work is split across workers.
    """
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, stream & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_orbit(m: MarkovMeasure, n: int, seed: int) -> np.ndarray:
    """Sample one orbit of length n (deterministic given seed).

    Initial block drawn from the stationary vector, then chain steps; the
    emitted sequence is the symbol projection of the block path.
    """
    if not m.ergodic:
        raise NotErgodic("orbit sampling requires an ergodic measure")
    paths = sample_paths(m, n, 1, seed)
    return paths[0]


def sample_paths(
    m: MarkovMeasure,
    n: int,
    trials: int,
    seed: int,
    chunk: int = 1 << 14,
) -> np.ndarray:
    """Sample ``trials`` independent symbol paths of length n, vectorized.

    Trials are partitioned into fixed-size chunks; chunk i uses the stream
    (seed, i). Results are independent of how chunks are scheduled.
    """
    if not m.ergodic:
        raise NotErgodic("path sampling requires an ergodic measure")
    k = m.block_order
    n_states = len(m.states)
    cum_pi = np.cumsum(m.stationary)
    cum_pi[-1] = 1.0
    cum_P = np.cumsum(m.transition, axis=1)
    cum_P[:, -1] = 1.0
    state_last = np.array([w[-1] for w in m.states], dtype=np.int8)
    out = np.empty((trials, n), dtype=np.int8)
    steps = max(n - k, 0)
    for ci, lo in enumerate(range(0, trials, chunk)):
        hi = min(lo + chunk, trials)
        size = hi - lo
        rng = stream_rng(seed, ci)
        u = rng.random((size, steps + 1))
        states = np.searchsorted(cum_pi, u[:, 0], side="right")
        states = np.minimum(states, n_states - 1)
        first = np.array([m.states[s][:n] for s in states], dtype=np.int8)
        out[lo:hi, : first.shape[1]] = first
        cur = states
        for t in range(steps):
            rows = cum_P[cur]
            nxt = (rows < u[:, t + 1][:, None]).sum(axis=1)
            nxt = np.minimum(nxt, n_states - 1)
            out[lo:hi, k + t] = state_last[nxt]
            cur = nxt
    return out
