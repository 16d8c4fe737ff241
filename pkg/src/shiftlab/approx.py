"""Constructive entropy denseness and sub-SFT (horseshoe) approximation.

"Horseshoe" is realized throughout as a proper transitive sub-SFT of the
ambient shift, presented by an allowed-word mask at some block order. Joins
bridge components through shortest ambient paths; the nested sequence
forbids one aperiodic word per stage, each extending the last, so the
stages are nested by construction and their entropies climb to the ambient
value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AmbientNotTransitive,
    InconsistentMarginals,
    NoBridge,
    NotTransitive,
)
from .measures import (
    CylinderMarginals,
    MarkovMeasure,
    cylinder_marginals,
    dstar_distance,
    dstar_truncation_bound,
    markov_entropy,
)
from .sft import SftGraph, Word, admissible_words, higher_block_recode, is_admissible
from .spectral import is_strongly_connected, perron_eigendata, strongly_connected


def markovization(
    marginals: CylinderMarginals,
    sft: SftGraph,
    tol: float = 1e-8,
) -> MarkovMeasure:
    """Max-entropy Markov measure matching depth-(k+1) cylinder frequencies.

    Transition probabilities are the conditional frequencies
    freq(w a) / freq(w); among all shift-invariant measures with the given
    marginals, this chain maximizes entropy (conditioning on more past can
    only lower the conditional entropy). The stationary vector is recomputed
    from the chain, so the output is exactly stationary even when the input
    tables carry noise up to ``tol``.
    """
    depth = marginals.depth
    if depth < 2:
        raise InconsistentMarginals("need depth >= 2 to condition on a past")
    if marginals.consistency_error() > tol:
        raise InconsistentMarginals(
            f"marginal consistency error {marginals.consistency_error():.3e} > {tol}"
        )
    if marginals.shift_invariance_error() > tol:
        raise InconsistentMarginals(
            f"shift-invariance error {marginals.shift_invariance_error():.3e} > {tol}"
        )
    k = depth - 1
    top = marginals.table(depth)
    base = marginals.table(k)
    for w in top:
        if top[w] > 0.0 and not is_admissible(sft, w):
            raise InconsistentMarginals(f"positive mass on forbidden word {w}")
    states = tuple(sorted(w for w, p in base.items() if p > 0.0))
    index = {w: i for i, w in enumerate(states)}
    n = len(states)
    P = np.zeros((n, n))
    for w, p in top.items():
        if p <= 0.0:
            continue
        i = index.get(w[:-1])
        j = index.get(w[1:])
        if i is None or j is None:
            raise InconsistentMarginals(f"word {w} has mass but its faces do not")
        P[i, j] += p / base[w[:-1]]
    rows = P.sum(axis=1)
    if np.any(rows <= 0.0):
        raise InconsistentMarginals("some positive-mass state has no continuation")
    P /= rows[:, None]
    support = P > 0.0
    if is_strongly_connected(support):
        _, _, left = perron_eigendata(P)
        pi = left / left.sum()
        ergodic = True
    else:
        pi = np.array([base[w] for w in states])
        pi = pi / pi.sum()
        n_comp, labels = strongly_connected(support)
        ergodic = n_comp == 1
    return MarkovMeasure(
        sft=sft,
        order=k,
        states=states,
        transition=P,
        stationary=pi,
        ergodic=ergodic,
    )


@dataclass(frozen=True)
class ErgodicApproxCertificate:
    """Witness data for one ergodic entropy-dense approximation."""

    order: int
    eta: float
    dstar: float
    dstar_tail_bound: float
    entropy: float
    reference_entropy: float

    @property
    def entropy_gap(self) -> float:
        return self.entropy - self.reference_entropy


def _bridge_transitions(m: MarkovMeasure, eta: float) -> MarkovMeasure:
    """Add mass eta along shortest ambient paths until the support connects."""
    sft = m.sft
    k = m.block_order
    coding = higher_block_recode(sft, k)
    amb_words = coding.words
    amb_index = coding.index
    amb_adj = coding.graph.allowed
    # current chain re-indexed over all ambient k-words
    n = len(amb_words)
    P = np.zeros((n, n))
    pi0 = np.zeros(n)
    for i, w in enumerate(m.states):
        gi = amb_index[w]
        pi0[gi] = m.stationary[i]
        for j in np.flatnonzero(m.transition[i] > 0.0):
            P[gi, amb_index[m.states[int(j)]]] = m.transition[i, int(j)]
    live = pi0 > 0.0
    while True:
        support = (P > 0.0) & live[:, None] & live[None, :]
        n_comp, labels = strongly_connected(support[np.ix_(live.nonzero()[0], live.nonzero()[0])])
        if n_comp == 1:
            break
        live_idx = live.nonzero()[0]
        # connect the first two components through a shortest ambient path
        comp_a = live_idx[labels == 0]
        targets = live_idx[labels != 0]
        path = _shortest_path(amb_adj, set(comp_a.tolist()), set(targets.tolist()))
        if path is None:
            raise NoBridge("ambient shift is not transitive")
        for u, v in zip(path, path[1:]):
            P[u, v] += eta
            live[u] = live[v] = True
        back = _shortest_path(amb_adj, {path[-1]}, {path[0]})
        if back is None:
            raise NoBridge("ambient shift is not transitive")
        for u, v in zip(back, back[1:]):
            P[u, v] += eta
            live[u] = live[v] = True
    live_idx = np.flatnonzero(live)
    P = P[np.ix_(live_idx, live_idx)]
    P /= P.sum(axis=1, keepdims=True)
    _, _, left = perron_eigendata(P)
    pi = left / left.sum()
    states = tuple(amb_words[i] for i in live_idx)
    return MarkovMeasure(
        sft=sft, order=m.order, states=states, transition=P, stationary=pi, ergodic=True
    )


def _shortest_path(adjacency: np.ndarray, sources: set, targets: set):
    """BFS path (vertex list) from any source to any target, None if absent."""
    frontier = list(sources)
    parent = {s: None for s in sources}
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(adjacency[u]):
                v = int(v)
                if v not in parent:
                    parent[v] = u
                    if v in targets:
                        path = [v]
                        while parent[path[-1]] is not None:
                            path.append(parent[path[-1]])
                        return path[::-1]
                    nxt.append(v)
        frontier = nxt
    # sources may already contain a target
    hit = sources & targets
    if hit:
        return [next(iter(hit))]
    return None


def entropy_dense_approx(
    target: CylinderMarginals,
    sft: SftGraph,
    epsilon: float,
    reference_entropy: float | None = None,
    tol: float = 1e-8,
) -> tuple[MarkovMeasure, ErgodicApproxCertificate]:
    """Ergodic measure within epsilon of the target, entropy above h - epsilon.

    Markovize at the deepest order whose weak* tail bound leaves room inside
    epsilon, then repair ergodicity (if needed) by bridging the support along
    ambient paths with mass eta, bisected down until both certificate
    inequalities hold. The reference entropy defaults to the Markovization's
    own entropy, an upper bound for every measure with these marginals, so
    the certificate inequality is conservative.
    """
    if not sft.transitive:
        raise AmbientNotTransitive("entropy-dense approximation needs a transitive ambient")
    # smallest order whose weak* tail already fits inside epsilon; deeper
    # orders are retried if certification fails
    orders = [
        k
        for k in range(1, target.depth)
        if dstar_truncation_bound(k + 1, sft.alphabet_size, sharp=True) < epsilon
    ]
    if not orders:
        orders = [target.depth - 1]
    for order in orders:
        shallow = CylinderMarginals(
            target.alphabet_size, order + 1, target.tables[: order + 1]
        )
        chain = markovization(shallow, sft, tol=tol)
        href = markov_entropy(chain) if reference_entropy is None else reference_entropy
        tail = dstar_truncation_bound(order + 1, sft.alphabet_size, sharp=True)

        def certify(candidate: MarkovMeasure, eta: float):
            d = (
                dstar_distance(target, cylinder_marginals(candidate, target.depth))
                + tail
            )
            h = markov_entropy(candidate)
            if d < epsilon and h > href - epsilon:
                return ErgodicApproxCertificate(
                    order=order,
                    eta=eta,
                    dstar=d,
                    dstar_tail_bound=tail,
                    entropy=h,
                    reference_entropy=href,
                )
            return None

        if chain.ergodic:
            cert = certify(chain, 0.0)
            if cert is not None:
                return chain, cert
        else:
            eta = 0.25 * epsilon
            for _ in range(60):
                repaired = _bridge_transitions(chain, eta)
                cert = certify(repaired, eta)
                if cert is not None:
                    return repaired, cert
                eta *= 0.5
    raise InconsistentMarginals(
        "could not certify an ergodic approximation; epsilon too small for the "
        "supplied marginal depth"
    )


@dataclass(frozen=True, eq=False)
class SubSft:
    """Sub-SFT of an ambient shift, as an allowed-word mask at a block order.

    The induced graph (vertices: allowed words; edges: progressive overlaps)
    is pruned to its recurrent part and must be strongly connected.
    """

    ambient: SftGraph
    order: int
    mask: frozenset
    graph: SftGraph
    words: tuple[Word, ...]

    def entropy(self) -> float:
        from .sft import topological_entropy

        return topological_entropy(self.graph)

    def is_proper(self) -> bool:
        return len(self.mask) < len(admissible_words(self.ambient, self.order))

    def admits_word(self, word: Word) -> bool:
        """Whether every length-``order`` window of ``word`` is allowed."""
        w = tuple(word)
        if len(w) < self.order:
            span = self.order - len(w)
            return any(
                w == u[i : i + len(w)] for u in self.mask for i in range(span + 1)
            )
        return all(
            w[i : i + self.order] in self.mask for i in range(len(w) - self.order + 1)
        )


def sub_sft(ambient: SftGraph, order: int, allowed_words) -> SubSft:
    """Build the sub-SFT spanned by the given words (pruned to recurrence)."""
    mask = {tuple(w) for w in allowed_words}
    for w in mask:
        if len(w) != order:
            raise ValueError("mask words must all have the mask order")
        if not is_admissible(ambient, w):
            raise ValueError(f"mask word {w} is not ambient-admissible")
    words = sorted(mask)
    index = {w: i for i, w in enumerate(words)}
    n = len(words)
    adj = np.zeros((n, n), dtype=bool)
    for i, u in enumerate(words):
        for s in range(ambient.alphabet_size):
            if order == 1:
                if ambient.allowed[u[-1], s]:
                    v = (s,)
                    j = index.get(v)
                    if j is not None:
                        adj[i, j] = True
            else:
                if ambient.allowed[u[-1], s]:
                    v = u[1:] + (s,)
                    j = index.get(v)
                    if j is not None:
                        adj[i, j] = True
    # prune to the recurrent part
    keep = np.ones(n, dtype=bool)
    while True:
        ok = (adj.any(axis=1) & adj.any(axis=0)) & keep
        if (ok == keep).all():
            break
        keep = ok
        adj = adj & keep[:, None] & keep[None, :]
    live = np.flatnonzero(keep)
    if len(live) == 0:
        raise NotTransitive("mask admits no recurrent orbit")
    sub_words = tuple(words[i] for i in live)
    sub_adj = adj[np.ix_(live, live)]
    if not is_strongly_connected(sub_adj):
        raise NotTransitive("induced subshift is not transitive")
    from .spectral import graph_period

    graph = SftGraph(
        alphabet_size=len(sub_words),
        allowed=sub_adj.copy(),
        transitive=True,
        mixing=bool(graph_period(sub_adj) == 1),
        symbols=tuple(range(len(sub_words))),
    )
    return SubSft(
        ambient=ambient,
        order=order,
        mask=frozenset(sub_words),
        graph=graph,
        words=sub_words,
    )


def sub_sft_from_forbidden(ambient: SftGraph, forbidden: Word) -> SubSft:
    """Sub-SFT forbidding exactly one word (pruned to its transitive core)."""
    order = len(forbidden)
    words = [w for w in admissible_words(ambient, order) if w != tuple(forbidden)]
    return sub_sft(ambient, order, words)


def lift_mask(s: SubSft, order: int) -> set:
    """Allowed words of s at a higher block order."""
    if order < s.order:
        raise ValueError("can only lift to a higher order")
    if order == s.order:
        return set(s.mask)
    out = set()
    for w in admissible_words(s.ambient, order):
        if s.admits_word(w):
            out.add(w)
    return out


def sub_sft_contains(big: SubSft, small: SubSft) -> bool:
    order = max(big.order, small.order)
    return lift_mask(small, order) <= lift_mask(big, order)


def sub_sft_equal(a: SubSft, b: SubSft) -> bool:
    order = max(a.order, b.order)
    return lift_mask(a, order) == lift_mask(b, order)


def sub_sft_join(a: SubSft, b: SubSft) -> SubSft:
    """Smallest constructed transitive sub-SFT containing both arguments.

    Masks are lifted to the common order and united; if the union is not
    already transitive, shortest ambient bridge words are added in both
    directions (breadth-first search through the ambient block graph).
    """
    if not a.ambient.same_graph(b.ambient):
        raise ValueError("joins need a common ambient shift")
    if not a.ambient.transitive:
        raise AmbientNotTransitive("join bridges require a transitive ambient")
    order = max(a.order, b.order)
    mask = lift_mask(a, order) | lift_mask(b, order)
    coding = higher_block_recode(a.ambient, order)
    amb_index = coding.index
    adj = coding.graph.allowed
    while True:
        try:
            joined = sub_sft(a.ambient, order, mask)
        except NotTransitive:
            joined = None
        if joined is not None and sub_sft_contains(joined, a) and sub_sft_contains(joined, b):
            return joined
        # connect components of the mask through the ambient graph
        idx = sorted(amb_index[w] for w in mask)
        sub_adj = adj[np.ix_(idx, idx)]
        n_comp, labels = strongly_connected(sub_adj)
        if n_comp <= 1 and joined is None:
            raise NoBridge("mask recurrent core lost words it must contain")
        comp0 = {idx[i] for i in np.flatnonzero(labels == 0)}
        rest = {idx[i] for i in np.flatnonzero(labels != 0)}
        path = _shortest_path(adj, comp0, rest)
        back = _shortest_path(adj, rest, comp0)
        if path is None or back is None:
            raise NoBridge("ambient graph admits no connecting path")
        for v in path + back:
            mask.add(coding.words[v])


def word_is_aperiodic(word: Word) -> bool:
    """No proper period: w[i] != w[i+p] for some i, for every p < len(w)."""
    n = len(word)
    for p in range(1, n):
        if all(word[i] == word[i + p] for i in range(n - p)):
            return False
    return True


def _candidate_forbidden_words(ambient: SftGraph, n: int):
    """Aperiodic admissible n-words in trial order, 0..011 preferred.

    Only aperiodic words qualify: an aperiodic word cannot occur in any
    orbit of period below n, so forbidding it spares every short periodic
    orbit. The caller's nesting, transitivity and properness checks weed
    out the rest (and repeat the previous stage when nothing survives).
    """
    top = ambient.alphabet_size - 1
    preferred: Word = (0,) * (n - 2) + (top, top) if n >= 2 else (top,)
    aperiodic = sorted(w for w in admissible_words(ambient, n) if word_is_aperiodic(w))
    if preferred in aperiodic:
        aperiodic.remove(preferred)
        aperiodic.insert(0, preferred)
    return aperiodic


def nested_horseshoe_sequence(
    ambient: SftGraph, n_max: int, start: int = 1
) -> list[SubSft]:
    """Nested proper transitive sub-SFTs with entropy climbing to the ambient.

    Stage n forbids a single aperiodic length-n word (candidates tried in a
    fixed cyclic order, preferring 0^(n-2) 1 1) and is joined with the
    previous stage; a stage repeats the previous one when no candidate keeps
    the subshift transitive, proper and nested (on a binary alphabet this
    happens at n = 2 and n = 3, where no admissible choice exists). Aperiodic
    forbidden words cannot occur in orbits of period below n, so every short
    periodic orbit survives each genuine stage.
    """
    if not ambient.transitive:
        raise AmbientNotTransitive("nested sequence needs a transitive ambient")
    from .sft import topological_entropy

    if topological_entropy(ambient) <= 0.0:
        raise NotTransitive("ambient entropy must be positive")
    stages: list[SubSft] = []
    previous: SubSft | None = None
    for n in range(start, n_max + 1):
        chosen: SubSft | None = None
        for word in _candidate_forbidden_words(ambient, n):
            try:
                stage = sub_sft_from_forbidden(ambient, word)
            except NotTransitive:
                continue
            if previous is not None:
                if not sub_sft_contains(stage, previous):
                    try:
                        stage = sub_sft_join(stage, previous)
                    except (NoBridge, NotTransitive):
                        continue
                    if not sub_sft_contains(stage, previous):
                        continue
            if not stage.is_proper():
                continue
            chosen = stage
            break
        if chosen is None:
            if previous is None:
                raise NoBridge(f"no usable forbidden word at order {n}")
            chosen = previous  # degenerate stage, as in the inductive scheme
        stages.append(chosen)
        previous = chosen
    return stages


def generic_point_demo(m: MarkovMeasure, n: int, seed: int, depth: int = 4):
    """Sampled orbit of an ergodic measure approximates it in the weak* metric.

    Returns (orbit, dstar between empirical and exact marginals at ``depth``).
    """
    from .measures import marginals_from_tables, sample_orbit

    orbit = sample_orbit(m, n, seed)
    tables = []
    for k in range(1, depth + 1):
        windows = np.lib.stride_tricks.sliding_window_view(orbit, k)
        words, counts = np.unique(windows, axis=0, return_counts=True)
        total = counts.sum()
        tables.append(
            {tuple(int(s) for s in w): c / total for w, c in zip(words, counts)}
        )
    empirical = marginals_from_tables(m.sft.alphabet_size, tables)
    return orbit, dstar_distance(empirical, cylinder_marginals(m, depth))


def full_support_witness(sft: SftGraph, eta: float = 1e-3) -> MarkovMeasure:
    """Ergodic full-support measure: Parry chain smoothed toward uniform rows.

    Every admissible transition gets probability at least eta / alphabet, so
    the support is the whole shift; used to exhibit full-support generic
    orbits.
    """
    from .measures import parry_measure

    base = parry_measure(sft)
    uniform = sft.allowed.astype(float)
    uniform /= uniform.sum(axis=1, keepdims=True)
    P = (1.0 - eta) * base.transition + eta * uniform
    P /= P.sum(axis=1, keepdims=True)
    _, _, left = perron_eigendata(P)
    pi = left / left.sum()
    return MarkovMeasure(
        sft=sft,
        order=1,
        states=base.states,
        transition=P,
        stationary=pi,
        ergodic=True,
    )
