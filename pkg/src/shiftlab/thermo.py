"""Transfer operators, pressure, equilibrium states and level-set spectra.

Conventions: a potential of order k is evaluated on the k-prefix of a word.
The transfer matrix lives on the m-block graph with m = max(k-1, 1); the
edge u -> v corresponds to the (m+1)-word u + v[-1] and carries weight
exp(psi) of that word's k-prefix, so the Perron value equals exp(pressure)
for every locally constant potential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import LevelOutOfRange, NotTransitive, SupportMismatch
from .functions import LocallyConstantFunction
from .measures import MarkovMeasure, integrate, markov_entropy
from .sft import BlockCoding, SftGraph, higher_block_recode, is_admissible
from .spectral import (
    extremal_mean_edges,
    max_cycle_mean,
    min_cycle_mean,
    perron_eigendata,
    spectral_radius,
)

Q_CAP = 200.0
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def golden_minimize(fn, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 300):
    """Golden-section minimum of a unimodal function on [lo, hi]."""
    a, b = float(lo), float(hi)
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fn(d)
    x = 0.5 * (a + b)
    return x, fn(x)


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    """Weighted transition table realizing the pressure of a potential."""

    sft: SftGraph
    coding: BlockCoding
    potential: LocallyConstantFunction
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix.setflags(write=False)


def _edge_weights(sft: SftGraph, f: LocallyConstantFunction, coding: BlockCoding) -> np.ndarray:
    """Edge table w[u, v] = f on the (m+1)-word u + v[-1] (NaN off-graph)."""
    n = len(coding.words)
    w = np.zeros((n, n))
    adj = coding.graph.allowed
    for u in range(n):
        for v in np.flatnonzero(adj[u]):
            word = coding.words[u] + (coding.words[int(v)][-1],)
            w[u, int(v)] = f.value(word)
    return w


def transfer_matrix(sft: SftGraph, psi: LocallyConstantFunction) -> TransferMatrix:
    m = max(psi.order - 1, 1)
    coding = higher_block_recode(sft, m)
    weights = _edge_weights(sft, psi, coding)
    matrix = np.where(coding.graph.allowed, np.exp(weights), 0.0)
    return TransferMatrix(sft=sft, coding=coding, potential=psi, matrix=matrix)


def pressure(sft: SftGraph, psi: LocallyConstantFunction) -> float:
    """Topological pressure: log Perron eigenvalue of the transfer matrix.

    Equals sup over invariant measures of entropy plus the integral of psi
    (checked against the constrained-entropy oracle in the test suite).
    """
    tm = transfer_matrix(sft, psi)
    return float(np.log(spectral_radius(tm.matrix)))


@dataclass(frozen=True, eq=False)
class EquilibriumState:
    measure: MarkovMeasure
    pressure: float
    eigenvalue: float
    right: np.ndarray
    left: np.ndarray

    @property
    def variational_residual(self) -> float:
        """|h + int psi - P|; the defining identity of an equilibrium state."""
        return self.__dict__["_residual"]


def equilibrium_state(sft: SftGraph, psi: LocallyConstantFunction) -> EquilibriumState:
    """Equilibrium (Gibbs) state of a locally constant potential.

    P_uv = W_uv r_v / (lam r_u) with (lam, r, l) the Perron data of the
    transfer matrix W; the stationary vector is l*r normalized. The
    variational identity h + int(psi) = pressure holds to solver precision.
    """
    if not sft.transitive:
        raise NotTransitive("equilibrium states require a transitive SFT")
    tm = transfer_matrix(sft, psi)
    lam, right, left = perron_eigendata(tm.matrix)
    n = len(tm.coding.words)
    P = tm.matrix * right[None, :] / (lam * right[:, None])
    P /= P.sum(axis=1, keepdims=True)
    pi = left * right
    pi = pi / pi.sum()
    order = max(psi.order - 1, 1)
    measure = MarkovMeasure(
        sft=sft,
        order=order,
        states=tm.coding.words,
        transition=P,
        stationary=pi,
        ergodic=True,
    )
    logp = float(np.log(lam))
    state = EquilibriumState(
        measure=measure, pressure=logp, eigenvalue=float(lam), right=right, left=left
    )
    state.__dict__["_residual"] = abs(
        markov_entropy(measure) + integrate(measure, psi) - logp
    )
    return state


@dataclass(frozen=True, eq=False)
class GibbsAudit:
    """Cylinder-level Gibbs constants of a measure against a potential.

    ratio_w(n) = mu[w] / exp(-n P + S_n psi(w)); the audit records per-n
    extremes and, for equilibrium inputs, the eigendata envelope that must
    contain them.
    """

    lengths: np.ndarray
    max_ratio: np.ndarray
    min_ratio: np.ndarray
    envelope_hi: float | None
    envelope_lo: float | None
    truncated: bool

    @property
    def two_sided_constant(self) -> np.ndarray:
        return np.maximum(self.max_ratio, 1.0 / self.min_ratio)


def birkhoff_sum(psi: LocallyConstantFunction, word) -> float:
    """S_n psi along the cylinder of an n-word: complete windows only.

    For order-k psi there are n - k + 1 windows; nothing is padded, boundary
    effects stay inside the audited constants.
    """
    k = psi.order
    n = len(word)
    return float(sum(psi.value(word[j : j + k]) for j in range(0, n - k + 1)))


def gibbs_word_tables(
    m: MarkovMeasure,
    psi: LocallyConstantFunction,
    n_max: int,
    budget: int = 10_000_000,
):
    """Per-length tables (n, log masses, log Gibbs ratios) over positive-mass words.

    log ratio(w) = log mu[w] + n P - S_n psi(w). Computed by a vectorized path
    expansion of the chain that carries the Birkhoff sum incrementally, so the
    cost is proportional to the number of positive-mass words. Lengths start
    at max(psi.order, block order) and stop early when the word count would
    exceed ``budget`` (the returned ``truncated`` flag reports this).
    """
    if psi.order > m.block_order + 1:
        from .measures import lift_measure

        m = lift_measure(m, psi.order - 1)
    k_psi = psi.order
    k = m.block_order
    P = pressure(m.sft, psi)
    n_start = max(k_psi, k)
    logP = np.where(
        m.transition > 0.0, np.log(np.maximum(m.transition, 1e-300)), -np.inf
    )
    # per-edge window value: the psi-window completed by appending v's last symbol
    n_states = len(m.states)
    edge_incr = np.zeros((n_states, n_states))
    for u in range(n_states):
        for v in np.flatnonzero(m.transition[u] > 0.0):
            word = m.states[u] + (m.states[int(v)][-1],)
            edge_incr[u, int(v)] = psi.value(word[len(word) - k_psi :])
    # windows fully inside the initial block
    init_S = np.array(
        [
            sum(psi.value(w[j : j + k_psi]) for j in range(0, k - k_psi + 1))
            if k >= k_psi
            else 0.0
            for w in m.states
        ]
    )
    live = m.stationary > 0.0
    states = np.flatnonzero(live)
    logmass = np.log(m.stationary[states])
    birk = init_S[states]
    tables = {}
    truncated = False
    n = k
    if n >= n_start:
        tables[n] = (logmass.copy(), logmass + n * P - birk)
    succ = [np.flatnonzero(m.transition[u] > 0.0) for u in range(n_states)]
    succ_counts = np.array([len(s) for s in succ])
    while n < n_max:
        counts = succ_counts[states]
        total = int(counts.sum())
        if total > budget:
            truncated = True
            break
        new_states = np.concatenate([succ[u] for u in states])
        rep = np.repeat(np.arange(len(states)), counts)
        step_lp = logP[states[rep], new_states]
        step_S = edge_incr[states[rep], new_states]
        states = new_states
        logmass = logmass[rep] + step_lp
        birk = birk[rep] + step_S
        n += 1
        if n >= n_start:
            tables[n] = (logmass.copy(), logmass + n * P - birk)
    return tables, truncated, P


def gibbs_constant_audit(
    m: MarkovMeasure,
    psi: LocallyConstantFunction,
    n_max: int,
    eigendata: EquilibriumState | None = None,
    budget: int = 10_000_000,
) -> GibbsAudit:
    """Per-n extremes of mu[w] / exp(-n P + S_n psi(w)) over admissible words.

    For an equilibrium state the chain telescopes: with m-block Perron data
    (lam, r, l) the ratio of an n-word w equals lam^m l_u0 r_un / (l.r)
    (order >= 2), picking up an extra exp(-psi(last symbol)) when the
    potential has order 1. The audit reports that closed-form envelope when
    eigendata is supplied, certifying the strong Gibbs property.
    """
    for w in m.states:
        if not is_admissible(m.sft, w):
            raise SupportMismatch(f"measure state {w} is inadmissible")
    tables, truncated, _ = gibbs_word_tables(m, psi, n_max, budget=budget)
    lengths = sorted(tables)
    maxr = [float(np.exp(tables[n][1].max())) for n in lengths]
    minr = [float(np.exp(tables[n][1].min())) for n in lengths]
    env_hi = env_lo = None
    if eigendata is not None:
        l, r = eigendata.left, eigendata.right
        lam = eigendata.eigenvalue
        norm = float(l @ r)
        m_block = max(psi.order - 1, 1)
        if psi.order == 1:
            # one Birkhoff window sticks out past the last transition
            adj = np.array(
                [
                    r[i] * math.exp(-psi.value(eigendata.measure.states[i]))
                    for i in range(len(r))
                ]
            )
        else:
            adj = r
        env_hi = lam**m_block * float(l.max()) * float(adj.max()) / norm
        env_lo = lam**m_block * float(l.min()) * float(adj.min()) / norm
    return GibbsAudit(
        lengths=np.array(lengths),
        max_ratio=np.array(maxr),
        min_ratio=np.array(minr),
        envelope_hi=env_hi,
        envelope_lo=env_lo,
        truncated=truncated,
    )


@dataclass(frozen=True, eq=False)
class SpectrumCurve:
    """Sampled graph of a Birkhoff level-set entropy spectrum."""

    levels: np.ndarray
    values: np.ndarray
    method: str
    a_min: float
    a_max: float
    residuals: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def peak(self) -> tuple[float, float]:
        i = int(np.argmax(self.values))
        return float(self.levels[i]), float(self.values[i])

    def concavity_defect(self) -> float:
        """Largest positive second difference (0 for a concave grid)."""
        if len(self.levels) < 3:
            return 0.0
        d2 = np.diff(self.values, 2)
        return float(max(0.0, d2.max()))


def spectrum_domain(sft: SftGraph, g: LocallyConstantFunction) -> tuple[float, float]:
    """Attainable interval of int(g) over invariant measures (cycle means)."""
    m = max(g.order - 1, 1)
    coding = higher_block_recode(sft, m)
    w = _edge_weights(sft, g, coding)
    adj = coding.graph.allowed
    return (
        float(min_cycle_mean(adj, w)),
        float(max_cycle_mean(adj, w)),
    )


def _boundary_entropy(sft: SftGraph, g: LocallyConstantFunction, mode: str) -> float:
    """Entropy of the sub-SFT spanned by extremal-mean cycles of g."""
    m = max(g.order - 1, 1)
    coding = higher_block_recode(sft, m)
    w = _edge_weights(sft, g, coding)
    mask = extremal_mean_edges(coding.graph.allowed, w, mode=mode)
    rho = spectral_radius(mask.astype(float))
    return float(np.log(rho)) if rho > 0 else 0.0


def _tilt_mean(sft: SftGraph, g: LocallyConstantFunction, q: float) -> float:
    """int(g) under the equilibrium state of q*g (the derivative of pressure)."""
    eq = equilibrium_state(sft, g * q)
    return integrate(eq.measure, g)


def legendre_spectrum(
    sft: SftGraph,
    g: LocallyConstantFunction,
    a_grid,
    q_cap: float = Q_CAP,
    boundary_tol: float = 1e-12,
) -> SpectrumCurve:
    """Level-set entropy spectrum by convex duality.

    h(a) = inf_q [pressure(q g) - q a], minimized by golden-section search on
    a bracket [-Q, Q] found by doubling Q until the tilted means straddle a.
    Levels at the domain boundary get the exact extremal-cycle entropy, where
    the transform degenerates.
    """
    a_min, a_max = spectrum_domain(sft, g)
    levels = np.asarray(a_grid, dtype=float)
    if np.any(levels < a_min - 1e-9) or np.any(levels > a_max + 1e-9):
        raise LevelOutOfRange(
            f"grid leaves the attainable interval [{a_min}, {a_max}]"
        )
    values = np.empty_like(levels)
    for i, a in enumerate(levels):
        if a <= a_min + boundary_tol:
            values[i] = _boundary_entropy(sft, g, "min")
            continue
        if a >= a_max - boundary_tol:
            values[i] = _boundary_entropy(sft, g, "max")
            continue
        q_hi = 1.0
        while q_hi < q_cap and _tilt_mean(sft, g, q_hi) < a:
            q_hi = min(2.0 * q_hi, q_cap)
        q_lo = -1.0
        while q_lo > -q_cap and _tilt_mean(sft, g, q_lo) > a:
            q_lo = max(2.0 * q_lo, -q_cap)
        _, val = golden_minimize(
            lambda q: pressure(sft, g * q) - q * a, q_lo, q_hi, tol=1e-10
        )
        values[i] = max(val, 0.0)
    return SpectrumCurve(
        levels=levels,
        values=values,
        method="legendre",
        a_min=a_min,
        a_max=a_max,
        metadata={"q_cap": q_cap},
    )


def _stationary_of(P: np.ndarray) -> np.ndarray | None:
    """Stationary vector of an irreducible stochastic matrix (None if reducible)."""
    from .spectral import is_strongly_connected

    if not is_strongly_connected(P > 0):
        return None
    n = P.shape[0]
    a = np.vstack([P.T - np.eye(n), np.ones(n)])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


_WITNESS_CACHE: dict = {}


def _grid_chain_envelope(sft: SftGraph, g: LocallyConstantFunction, resolution: int):
    """Upper concave envelope of (mean, entropy) over grid stochastic tables.

    Rows range over the simplex grid with denominator ``resolution``.
    Entropy and the integral are both affine under mixing of invariant
    measures, so the attainable (mean, entropy) pairs of mixtures fill the
    convex hull of the chain points; the witness at level a is the upper
    envelope evaluated there. Cached per (shift, observable, resolution).
    """
    from itertools import product as iproduct

    from .errors import BudgetExceeded

    key = (
        sft.allowed.tobytes(),
        sft.alphabet_size,
        g.order,
        g.values.tobytes(),
        resolution,
    )
    hit = _WITNESS_CACHE.get(key)
    if hit is not None:
        return hit
    m = max(g.order - 1, 1)
    coding = higher_block_recode(sft, m)
    adj = coding.graph.allowed
    n = adj.shape[0]
    succ = [np.flatnonzero(adj[i]) for i in range(n)]

    def compositions(total: int, parts: int):
        if parts == 1:
            yield (total,)
            return
        for first in range(total + 1):
            for rest in compositions(total - first, parts - 1):
                yield (first,) + rest

    row_options = []
    combos = 1
    for i in range(n):
        opts = [
            np.array(c, dtype=float) / resolution
            for c in compositions(resolution, len(succ[i]))
        ]
        row_options.append(opts)
        combos *= len(opts)
        if combos > 2_000_000:
            raise BudgetExceeded("grid witness enumeration too large")

    gw = _edge_weights(sft, g, coding)
    pts = []
    for choice in iproduct(*row_options):
        P = np.zeros((n, n))
        for i, row in enumerate(choice):
            P[i, succ[i]] = row
        pi = _stationary_of(P)
        if pi is None:
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            plogp = np.where(P > 0, P * np.log(P), 0.0)
        h = float(-(pi @ plogp.sum(axis=1)))
        mean = float((pi[:, None] * P * gw).sum())
        pts.append((mean, h))
    pts.sort()
    hull: list[tuple[float, float]] = []
    for p in pts:
        while len(hull) >= 2 and (
            (hull[-1][0] - hull[-2][0]) * (p[1] - hull[-2][1])
            - (p[0] - hull[-2][0]) * (hull[-1][1] - hull[-2][1])
            >= 0.0
        ):
            hull.pop()
        hull.append(p)
    xs = np.array([p[0] for p in hull])
    ys = np.array([p[1] for p in hull])
    _WITNESS_CACHE[key] = (xs, ys)
    return xs, ys


def _grid_chain_witness(
    sft: SftGraph, g: LocallyConstantFunction, a: float, resolution: int
) -> float:
    """Best entropy at mean a over grid chains and their mixtures."""
    xs, ys = _grid_chain_envelope(sft, g, resolution)
    if a <= xs[0]:
        return float(ys[0]) if abs(a - xs[0]) < 1e-9 else -np.inf
    if a >= xs[-1]:
        return float(ys[-1]) if abs(a - xs[-1]) < 1e-9 else -np.inf
    return float(np.interp(a, xs, ys))


def constrained_entropy_oracle(
    sft: SftGraph,
    g: LocallyConstantFunction,
    a: float,
    grid_resolution: int = 40,
    grid_slack: float = 1e-3,
) -> float:
    """sup of entropy over invariant measures with int(g) = a, by tilting.

    Bisection on the exponential-tilting parameter q matches the equilibrium
    mean of q*g to a, and the value is the Shannon entropy of that chain (an
    independent route from the Legendre arithmetic). A coarse brute-force
    grid search over stochastic tables provides a lower-bound witness; the
    witness may not exceed the tilting value by more than ``grid_slack``.
    """
    a_min, a_max = spectrum_domain(sft, g)
    if a < a_min - 1e-9 or a > a_max + 1e-9:
        raise LevelOutOfRange(f"a={a} outside [{a_min}, {a_max}]")
    if a <= a_min + 1e-12:
        return _boundary_entropy(sft, g, "min")
    if a >= a_max - 1e-12:
        return _boundary_entropy(sft, g, "max")
    q_lo, q_hi = -1.0, 1.0
    while q_hi < Q_CAP and _tilt_mean(sft, g, q_hi) < a:
        q_hi = min(2.0 * q_hi, Q_CAP)
    while q_lo > -Q_CAP and _tilt_mean(sft, g, q_lo) > a:
        q_lo = max(2.0 * q_lo, -Q_CAP)
    for _ in range(200):
        q_mid = 0.5 * (q_lo + q_hi)
        if _tilt_mean(sft, g, q_mid) < a:
            q_lo = q_mid
        else:
            q_hi = q_mid
        if q_hi - q_lo <= 1e-13 * max(1.0, abs(q_mid)):
            break
    eq = equilibrium_state(sft, g * (0.5 * (q_lo + q_hi)))
    value = markov_entropy(eq.measure)
    witness = _grid_chain_witness(sft, g, a, grid_resolution)
    assert witness <= value + grid_slack, (
        f"grid witness {witness} exceeds tilting value {value} by more than "
        f"{grid_slack}"
    )
    return float(value)


def rate_functional(mu, psi: LocallyConstantFunction, sft: SftGraph) -> float:
    """pressure(psi) - h(mu) - int(psi) on invariant input, +inf otherwise.

    Accepts a MarkovMeasure or a CylinderMarginals system; marginal input is
    interpreted through its max-entropy Markov extension and must be
    shift-invariant to 1e-8, else the +inf branch applies.
    """
    from .measures import CylinderMarginals

    P = pressure(sft, psi)
    if isinstance(mu, CylinderMarginals):
        if mu.shift_invariance_error() > 1e-8 or mu.consistency_error() > 1e-8:
            return math.inf
        from .approx import markovization

        mu = markovization(mu, sft)
    return P - markov_entropy(mu) - integrate(mu, psi)
