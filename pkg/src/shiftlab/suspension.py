"""Suspension flows over SFTs with locally constant roofs.

Flow observables enter through their induced section functions (the fiber
integral of the observable), so every flow quantity reduces to ratios of
base-shift integrals and to pressure-root equations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadSchedule, LevelOutOfRange, NonConvergence
from .functions import LocallyConstantFunction
from .measures import MarkovMeasure, integrate, markov_entropy
from .sft import SftGraph, higher_block_recode
from .spectral import (
    extremal_cycle_ratio,
    extremal_mean_edges,
    spectral_radius,
)
from .thermo import (
    SpectrumCurve,
    _edge_weights,
    equilibrium_state,
    golden_minimize,
    Q_CAP,
)


@dataclass(frozen=True, eq=False)
class SuspensionSystem:
    """Suspension flow data: transitive base shift and positive roof."""

    base: SftGraph
    roof: LocallyConstantFunction
    observables: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.roof.min() <= 0.0:
            raise ValueError("roof must be strictly positive")
        for name, phi in self.observables.items():
            if not phi.sft.same_graph(self.base):
                raise ValueError(f"observable {name!r} lives on a different base")


@dataclass(frozen=True, eq=False)
class FlowMeasure:
    """Invariant flow measure determined by a base measure and the roof."""

    base_measure: MarkovMeasure
    roof: LocallyConstantFunction
    normalizer: float

    @property
    def flow_entropy(self) -> float:
        return markov_entropy(self.base_measure) / self.normalizer


def flow_measure(m: MarkovMeasure, roof: LocallyConstantFunction) -> FlowMeasure:
    return FlowMeasure(base_measure=m, roof=roof, normalizer=integrate(m, roof))


def abramov_entropy(m: MarkovMeasure, roof: LocallyConstantFunction) -> float:
    """Flow entropy of the suspended measure: base entropy / int(roof)."""
    return markov_entropy(m) / integrate(m, roof)


def flow_integral(
    m: MarkovMeasure,
    roof: LocallyConstantFunction,
    phi_g: LocallyConstantFunction,
) -> float:
    """Flow average of the observable inducing phi_g: int(phi_g) / int(roof)."""
    return integrate(m, phi_g) / integrate(m, roof)


def _block_setup(sft: SftGraph, funcs):
    """Common block presentation plus edge-weight tables for the functions."""
    m = max(max(f.order for f in funcs) - 1, 1)
    coding = higher_block_recode(sft, m)
    tables = [_edge_weights(sft, f, coding) for f in funcs]
    return coding, tables


def _pressure_root(
    adjacency: np.ndarray,
    potential_w: np.ndarray,
    roof_w: np.ndarray,
    tol: float = 1e-12,
) -> float:
    """Unique s with log rho(adj * exp(potential - s*roof)) = 0.

    The map is strictly decreasing in s (roof positive on edges), so plain
    bisection with bracket expansion converges unconditionally.
    """

    def value(s: float) -> float:
        mat = np.where(adjacency, np.exp(potential_w - s * roof_w), 0.0)
        rho = spectral_radius(mat)
        if rho <= 0.0:
            raise NonConvergence("subgraph lost all cycles")
        return math.log(rho)

    lo, hi = 0.0, 1.0
    v_lo = value(lo)
    if v_lo < 0.0:
        while value(-abs(hi)) < 0.0:
            hi *= 2.0
            if hi > 1e6:
                raise NonConvergence("pressure root bracket expansion failed")
        lo, hi = -abs(hi), lo
    else:
        while value(hi) > 0.0:
            hi *= 2.0
            if hi > 1e6:
                raise NonConvergence("pressure root bracket expansion failed")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if value(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi)


def flow_topological_entropy(susp: SuspensionSystem, tol: float = 1e-12) -> float:
    """Topological entropy of the suspension flow.

    Computed as the unique root s* of pressure(-s * roof) = 0 and
    cross-checked from below by the Abramov entropy of the equilibrium state
    at -s* * roof (the two agree to solver precision).
    """
    if not susp.base.transitive:
        raise NonConvergence("flow entropy requires a transitive base")
    coding, (roof_w,) = _block_setup(susp.base, [susp.roof])
    s_star = _pressure_root(coding.graph.allowed, np.zeros_like(roof_w), roof_w, tol)
    eq = equilibrium_state(susp.base, susp.roof * (-s_star))
    witness = abramov_entropy(eq.measure, susp.roof)
    if witness > s_star + 1e-8 or witness < s_star - 1e-6:
        raise NonConvergence(
            f"Abramov cross-check failed: root {s_star} vs witness {witness}"
        )
    return s_star


def flow_spectrum_domain(
    susp: SuspensionSystem, phi_g: LocallyConstantFunction
) -> tuple[float, float]:
    """Attainable interval of the flow average of the observable."""
    coding, (phi_w, roof_w) = _block_setup(susp.base, [phi_g, susp.roof])
    adj = coding.graph.allowed
    return (
        float(extremal_cycle_ratio(adj, phi_w, roof_w, mode="min")),
        float(extremal_cycle_ratio(adj, phi_w, roof_w, mode="max")),
    )


def _flow_boundary_entropy(
    susp: SuspensionSystem, phi_g: LocallyConstantFunction, a: float, mode: str
) -> float:
    """Flow entropy carried by the extremal-ratio cycles at a domain endpoint."""
    coding, (phi_w, roof_w) = _block_setup(susp.base, [phi_g, susp.roof])
    adj = coding.graph.allowed
    mask = extremal_mean_edges(adj, phi_w - a * roof_w, mode=mode)
    return _pressure_root(mask, np.zeros_like(roof_w), roof_w)


def flow_level_spectrum(
    susp: SuspensionSystem,
    phi_g: LocallyConstantFunction,
    a_grid,
    q_cap: float = Q_CAP,
    boundary_tol: float = 1e-12,
) -> SpectrumCurve:
    """Level-set entropy spectrum of a flow observable.

    h(a) = inf_q s(q, a) where s(q, a) is the unique root of
    pressure(q*(phi_g - a*roof) - s*roof) = 0 (bisection inside, golden
    section over q outside). s(q, a) is a supremum of affine functions of q,
    hence convex; the infimum is the constrained variational value.
    """
    coding, (phi_w, roof_w) = _block_setup(susp.base, [phi_g, susp.roof])
    adj = coding.graph.allowed
    a_min, a_max = flow_spectrum_domain(susp, phi_g)
    levels = np.asarray(a_grid, dtype=float)
    if np.any(levels < a_min - 1e-9) or np.any(levels > a_max + 1e-9):
        raise LevelOutOfRange(f"grid leaves [{a_min}, {a_max}]")

    def root(q: float, a: float) -> float:
        return _pressure_root(adj, q * (phi_w - a * roof_w), roof_w, tol=1e-12)

    def tilt_flow_mean(q: float, a: float) -> float:
        s = root(q, a)
        pot = (phi_g - susp.roof * a) * q - susp.roof * s
        eq = equilibrium_state(susp.base, pot)
        return flow_integral(eq.measure, susp.roof, phi_g)

    values = np.empty_like(levels)
    for i, a in enumerate(levels):
        if a <= a_min + boundary_tol:
            values[i] = _flow_boundary_entropy(susp, phi_g, a_min, "min")
            continue
        if a >= a_max - boundary_tol:
            values[i] = _flow_boundary_entropy(susp, phi_g, a_max, "max")
            continue
        q_hi = 1.0
        while q_hi < q_cap and tilt_flow_mean(q_hi, a) < a:
            q_hi = min(2.0 * q_hi, q_cap)
        q_lo = -1.0
        while q_lo > -q_cap and tilt_flow_mean(q_lo, a) > a:
            q_lo = max(2.0 * q_lo, -q_cap)
        _, val = golden_minimize(lambda q: root(q, a), q_lo, q_hi, tol=1e-8)
        values[i] = max(val, 0.0)
    return SpectrumCurve(
        levels=levels,
        values=values,
        method="flow-legendre",
        a_min=a_min,
        a_max=a_max,
        metadata={"q_cap": q_cap, "roof_min": susp.roof.min()},
    )


def flow_constrained_oracle(
    susp: SuspensionSystem, phi_g: LocallyConstantFunction, a: float
) -> float:
    """sup of Abramov entropy over measures with flow average a, by tilting.

    Bisection on q matches the flow average of the equilibrium of
    q*(phi_g - a*roof) - s(q)*roof to a; the value is evaluated through the
    Shannon entropy / roof-integral route, independently of the root
    arithmetic in ``flow_level_spectrum``.
    """
    coding, (phi_w, roof_w) = _block_setup(susp.base, [phi_g, susp.roof])
    adj = coding.graph.allowed
    a_min, a_max = flow_spectrum_domain(susp, phi_g)
    if a < a_min - 1e-9 or a > a_max + 1e-9:
        raise LevelOutOfRange(f"a={a} outside [{a_min}, {a_max}]")
    if a <= a_min + 1e-12:
        return _flow_boundary_entropy(susp, phi_g, a_min, "min")
    if a >= a_max - 1e-12:
        return _flow_boundary_entropy(susp, phi_g, a_max, "max")

    def measure_at(q: float) -> MarkovMeasure:
        s = _pressure_root(adj, q * (phi_w - a * roof_w), roof_w, tol=1e-12)
        pot = (phi_g - susp.roof * a) * q - susp.roof * s
        return equilibrium_state(susp.base, pot).measure

    def mean(q: float) -> float:
        m = measure_at(q)
        return flow_integral(m, susp.roof, phi_g)

    q_lo, q_hi = -1.0, 1.0
    while q_hi < Q_CAP and mean(q_hi) < a:
        q_hi = min(2.0 * q_hi, Q_CAP)
    while q_lo > -Q_CAP and mean(q_lo) > a:
        q_lo = max(2.0 * q_lo, -Q_CAP)
    for _ in range(100):
        q_mid = 0.5 * (q_lo + q_hi)
        if mean(q_mid) < a:
            q_lo = q_mid
        else:
            q_hi = q_mid
        if q_hi - q_lo <= 1e-12 * max(1.0, abs(q_mid)):
            break
    m = measure_at(0.5 * (q_lo + q_hi))
    return abramov_entropy(m, susp.roof)


@dataclass(frozen=True, eq=False)
class IrregularPointResult:
    """A constructed orbit whose Birkhoff averages oscillate forever."""

    sequence: np.ndarray
    block_lengths: tuple[int, ...]
    boundary_positions: tuple[int, ...]
    boundary_averages: tuple[float, ...]
    measured_liminf: float
    measured_limsup: float
    predicted_liminf: float
    predicted_limsup: float


def irregular_point(ratio: float, n_blocks: int, first_symbol: int = 1) -> IrregularPointResult:
    """Concatenated blocks 1^{n_1} 0^{n_2} 1^{n_3} ... with n_k = round(r^k).

    Geometric growth keeps each new block comparable to the whole past, so
    the running frequency of symbol 1 oscillates between 1/(r+1) and r/(r+1)
    instead of converging. Rejected (BadSchedule) when the growth ratio is
    <= 1, where the averages would Cesaro-converge.
    """
    if n_blocks < 2:
        raise BadSchedule("need at least two blocks")
    if not ratio > 1.0:
        raise BadSchedule(f"growth ratio must exceed 1, got {ratio}")
    lengths = [max(1, round(ratio**k)) for k in range(1, n_blocks + 1)]
    if any(b <= a for a, b in zip(lengths, lengths[1:])):
        raise BadSchedule(f"block lengths {lengths} are not strictly increasing")
    chunks = []
    sym = first_symbol
    for n_k in lengths:
        chunks.append(np.full(n_k, sym, dtype=np.int8))
        sym = 1 - sym
    seq = np.concatenate(chunks)
    ones = np.cumsum(seq == 1)
    positions = np.cumsum(lengths)
    averages = ones[positions - 1] / positions
    # the limit points of the running average sit at late block boundaries;
    # the last boundary of each parity is the measured estimate
    odd = averages[::2]
    even = averages[1::2]
    hi = float(odd[-1]) if first_symbol == 1 else float(even[-1])
    lo = float(even[-1]) if first_symbol == 1 else float(odd[-1])
    return IrregularPointResult(
        sequence=seq,
        block_lengths=tuple(lengths),
        boundary_positions=tuple(int(p) for p in positions),
        boundary_averages=tuple(float(x) for x in averages),
        measured_liminf=lo,
        measured_limsup=hi,
        predicted_liminf=1.0 / (ratio + 1.0),
        predicted_limsup=ratio / (ratio + 1.0),
    )


def cylinder_counting_entropy(
    sft: SftGraph,
    predicate,
    n: int,
    stats: str = "symbol_freq",
    budget: int = 10_000_000,
    sample: tuple[int, int] | None = None,
) -> float:
    """(1/n) log of the number of admissible n-words passing a predicate.

    stats="symbol_freq": the predicate receives the empirical symbol
    frequency vector of the word; words are aggregated by frequency class
    with an exact integer DP, so any n is exact and cheap.

    stats="word": the predicate receives the word itself; words are
    enumerated up to ``budget``, beyond which a uniform word sample of
    ``sample=(trials, seed)`` estimates the passing fraction (BudgetExceeded
    without it).

    Returns -inf when no word passes.
    """
    from .errors import BudgetExceeded

    a = sft.alphabet_size
    if stats == "symbol_freq":
        # dp over (last symbol, symbol-count vector), exact integer counts
        dp: dict = {}
        for s in range(a):
            counts = [0] * a
            counts[s] = 1
            dp[(s, tuple(counts))] = 1
        for _ in range(n - 1):
            nxt: dict = {}
            for (last, comp), cnt in dp.items():
                for s in range(a):
                    if not sft.allowed[last, s]:
                        continue
                    comp2 = list(comp)
                    comp2[s] += 1
                    key = (s, tuple(comp2))
                    nxt[key] = nxt.get(key, 0) + cnt
            dp = nxt
        class_totals: dict = {}
        for (last, comp), cnt in dp.items():
            class_totals[comp] = class_totals.get(comp, 0) + cnt
        total = 0
        for comp, cnt in class_totals.items():
            freq = np.array(comp, dtype=float) / n
            if predicate(freq):
                total += cnt
        return math.log(total) / n if total > 0 else -math.inf
    if stats != "word":
        raise ValueError("stats must be 'symbol_freq' or 'word'")
    if a**n <= budget:
        from .sft import enumerate_words_array

        words = enumerate_words_array(sft, n, budget=budget)
        total = sum(1 for w in words if predicate(tuple(int(s) for s in w)))
        return math.log(total) / n if total > 0 else -math.inf
    if sample is None:
        raise BudgetExceeded(
            f"{a}**{n} words exceed the budget and no sample spec was given"
        )
    trials, seed = sample
    from .measures import stream_rng
    from .sft import count_words

    # uniform sampling over admissible words: completion counts per suffix length
    weights = [np.ones(a)]
    adj = sft.allowed.astype(float)
    for _ in range(n - 1):
        w = adj @ weights[-1]
        weights.append(w / w.max())
    rng = stream_rng(seed, 0)
    hits = 0
    for _ in range(trials):
        word = []
        prev = None
        for j in range(n):
            w = weights[n - 1 - j].copy()
            if prev is not None:
                w = w * adj[prev]
            p = w / w.sum()
            prev = int(rng.choice(a, p=p))
            word.append(prev)
        if predicate(tuple(word)):
            hits += 1
    total_est = count_words(sft, n) * (hits / trials)
    return math.log(total_est) / n if total_est > 0 else -math.inf


@dataclass(frozen=True, eq=False)
class SeparatedSetResult:
    """Greedy separated-orbit count used as an entropy estimator."""

    entropy: float
    cardinality: int
    horizon: int
    epsilon: float
    discretization_slack: float


def separated_set_entropy(
    orbit_fn,
    t: int,
    eps: float,
    candidates,
    grid_pitch: float | None = None,
    expansion_slack: float | None = None,
) -> SeparatedSetResult:
    """Greedy maximal (t, eps)-separated subset of candidate initial points.

    orbit_fn(xs, t) must return the (len(xs), t) array of forward orbit
    coordinates. Two points are separated when some coordinate of their
    orbit rows differs by at least eps; candidates far apart at time 0 are
    separated outright, which prunes the pairwise checks to an eps-window
    in the sorted candidate list.

    The returned ``discretization_slack`` records the factor by which eps
    must shrink when separation is certified on sampled times only (1 for
    maps, exp(L) for unit-time flow sampling with Lipschitz field L).

    Candidates must resolve the dynamics at the requested scale; when
    ``grid_pitch`` and ``expansion_slack`` are supplied the guard
    pitch * slack < eps is enforced (GridTooCoarse).
    """
    from .errors import GridTooCoarse

    xs = np.sort(np.asarray(candidates, dtype=float))
    if grid_pitch is not None and expansion_slack is not None:
        if grid_pitch * expansion_slack >= eps:
            raise GridTooCoarse(
                f"pitch {grid_pitch} x slack {expansion_slack} >= eps {eps}"
            )
    orbits = np.asarray(orbit_fn(xs, t), dtype=float)
    kept_rows: list[np.ndarray] = []
    kept_x: list[float] = []
    import bisect as _bisect

    for i in range(len(xs)):
        x = float(xs[i])
        row = orbits[i]
        lo = _bisect.bisect_left(kept_x, x - eps)
        window = kept_rows[lo:]
        separated = True
        if window:
            block = np.stack(window)
            if float(np.abs(block - row[None, :]).max(axis=1).min()) < eps:
                separated = False
        if separated:
            kept_rows.append(row)
            kept_x.append(x)
    count = len(kept_rows)
    entropy = math.log(count) / t if count > 0 else -math.inf
    return SeparatedSetResult(
        entropy=entropy,
        cardinality=count,
        horizon=t,
        epsilon=eps,
        discretization_slack=1.0,
    )
