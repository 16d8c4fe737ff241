"""Large-deviations laboratory: exact CGFs, rate functions, DP oracles,
Monte Carlo deviation runs, level-2 ball rates and weak-Gibbs audits.

Window convention: a path of n chain states carries n observable windows
(the ambient word is long enough for each state to expose one window), so
Birkhoff sums, DP distributions and Monte Carlo all count the same n terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import BudgetExceeded, Infeasible, LevelOutOfRange, NotErgodic
from .functions import LocallyConstantFunction, indicator
from .measures import (
    MarkovMeasure,
    integrate,
    lift_measure,
    markov_entropy,
    sample_paths,
)
from .sft import SftGraph, Word, is_admissible
from .spectral import max_cycle_mean, min_cycle_mean, perron_eigendata, simple_cycles
from .thermo import (
    Q_CAP,
    equilibrium_state,
    gibbs_word_tables,
    golden_minimize,
    pressure,
)


def _aligned(m: MarkovMeasure, g: LocallyConstantFunction) -> MarkovMeasure:
    """Lift the measure so every chain state exposes one g-window."""
    if g.order > m.block_order:
        return lift_measure(m, g.order)
    return m


def _state_weights(m: MarkovMeasure, g: LocallyConstantFunction) -> np.ndarray:
    return np.array([g.value(w) for w in m.states])


def exact_cgf(m: MarkovMeasure, g: LocallyConstantFunction, q: float, n: int) -> float:
    """(1/n) log E[exp(q S_n g)] computed exactly by tilted matrix products.

    Log-domain rescaling after every step keeps the product in range for any
    q and n, so overflow is impossible by construction.
    """
    m = _aligned(m, g)
    gv = _state_weights(m, g)
    tilt = np.exp(q * gv)
    v = m.stationary * tilt
    log_acc = 0.0
    D = m.transition * tilt[None, :]
    for _ in range(n - 1):
        v = v @ D
        peak = v.max()
        v /= peak
        log_acc += math.log(peak)
    return (log_acc + math.log(v.sum())) / n


def cgf_limit(m: MarkovMeasure, g: LocallyConstantFunction, q: float) -> float:
    """Limiting scaled CGF: log Perron value of the tilted transition table."""
    m = _aligned(m, g)
    gv = _state_weights(m, g)
    D = m.transition * np.exp(q * gv)[None, :]
    lam, _, _ = perron_eigendata(D)
    return math.log(lam)


def _tilted_chain(m: MarkovMeasure, g: LocallyConstantFunction, q: float):
    """Stochasticized tilted chain, its stationary vector and state weights."""
    m = _aligned(m, g)
    gv = _state_weights(m, g)
    D = m.transition * np.exp(q * gv)[None, :]
    lam, r, l = perron_eigendata(D)
    P = D * r[None, :] / (lam * r[:, None])
    P /= P.sum(axis=1, keepdims=True)
    pi = l * r
    pi /= pi.sum()
    return P, pi, gv, math.log(lam)


def cgf_mean(m: MarkovMeasure, g: LocallyConstantFunction, q: float) -> float:
    """Derivative of the limiting CGF at q: tilted stationary mean of g."""
    _, pi, gv, _ = _tilted_chain(m, g, q)
    return float(pi @ gv)


def deviation_range(m: MarkovMeasure, g: LocallyConstantFunction) -> tuple[float, float]:
    """Essential range of Birkhoff means of g under the measure's support."""
    mm = _aligned(m, g)
    gv = _state_weights(mm, g)
    adj = mm.transition > 0.0
    w = np.broadcast_to(gv[None, :], adj.shape)
    return float(min_cycle_mean(adj, w)), float(max_cycle_mean(adj, w))


@dataclass(frozen=True, eq=False)
class RateCurve:
    """Sampled level-1 rate function with its CGF samples and metadata."""

    levels: np.ndarray
    values: np.ndarray
    multipliers: np.ndarray
    cgf_q: np.ndarray
    cgf_values: np.ndarray
    mean: float
    s_min: float
    s_max: float
    metadata: dict = field(default_factory=dict)

    def convexity_defect(self) -> float:
        if len(self.levels) < 3:
            return 0.0
        d2 = np.diff(self.values, 2)
        return float(max(0.0, -d2.min()))


def level1_rate(
    m: MarkovMeasure,
    g: LocallyConstantFunction,
    s_grid,
    q_cap: float = Q_CAP,
) -> RateCurve:
    """Legendre transform I(s) = sup_q [q s - CGF(q)] on a grid of levels.

    The supremum is located by golden-section on a bracket found by doubling
    q until the tilted means straddle s (capped at q_cap; at the cap the
    boundary value is approached to within an exponentially small error).
    """
    s_min, s_max = deviation_range(m, g)
    levels = np.asarray(s_grid, dtype=float)
    if np.any(levels < s_min - 1e-9) or np.any(levels > s_max + 1e-9):
        raise LevelOutOfRange(f"levels leave [{s_min}, {s_max}]")
    values = np.empty_like(levels)
    mults = np.empty_like(levels)
    for i, s in enumerate(levels):
        q_hi = 1.0
        while q_hi < q_cap and cgf_mean(m, g, q_hi) < s:
            q_hi = min(2.0 * q_hi, q_cap)
        q_lo = -1.0
        while q_lo > -q_cap and cgf_mean(m, g, q_lo) > s:
            q_lo = max(2.0 * q_lo, -q_cap)
        q_star, neg = golden_minimize(
            lambda q: -(q * s - cgf_limit(m, g, q)), q_lo, q_hi, tol=1e-10
        )
        values[i] = max(-neg, 0.0)
        mults[i] = q_star
    q_samples = np.linspace(-4.0, 4.0, 17)
    cgf_vals = np.array([cgf_limit(m, g, q) for q in q_samples])
    return RateCurve(
        levels=levels,
        values=values,
        multipliers=mults,
        cgf_q=q_samples,
        cgf_values=cgf_vals,
        mean=integrate(m, g),
        s_min=s_min,
        s_max=s_max,
    )


def constrained_rate_inf(
    sft: SftGraph,
    psi: LocallyConstantFunction,
    g: LocallyConstantFunction,
    s: float,
    q_cap: float = Q_CAP,
) -> float:
    """inf of the rate functional over measures with int(g) = s, by tilting.

    Contraction-principle counterpart of ``level1_rate`` computed through the
    thermodynamic route: match the equilibrium mean of psi + q g to s, then
    evaluate pressure(psi) - h - int(psi) at that equilibrium.
    """
    P0 = pressure(sft, psi)

    def mean(q: float) -> float:
        eq = equilibrium_state(sft, psi + g * q)
        return integrate(eq.measure, g)

    q_lo, q_hi = -1.0, 1.0
    while q_hi < q_cap and mean(q_hi) < s:
        q_hi = min(2.0 * q_hi, q_cap)
    while q_lo > -q_cap and mean(q_lo) > s:
        q_lo = max(2.0 * q_lo, -q_cap)
    for _ in range(200):
        q_mid = 0.5 * (q_lo + q_hi)
        if mean(q_mid) < s:
            q_lo = q_mid
        else:
            q_hi = q_mid
        if q_hi - q_lo <= 1e-13 * max(1.0, abs(q_mid)):
            break
    eq = equilibrium_state(sft, psi + g * (0.5 * (q_lo + q_hi)))
    return P0 - markov_entropy(eq.measure) - integrate(eq.measure, psi)


def rate_sup_literal(
    sft: SftGraph,
    psi: LocallyConstantFunction,
    g: LocallyConstantFunction,
    s: float,
    cycle_budget: int = 100_000,
) -> float:
    """sup of the rate functional over measures with int(g) = s.

    Equals pressure(psi) minus the minimum of int(psi) over the constraint
    set; the minimum sits on the lower convex envelope of the cycle-mean
    moment pairs (mean g, mean psi), attained by zero-entropy cycle
    mixtures. Reported side by side with the contraction-principle infimum,
    which the level-1 Legendre transform reproduces; the two differ whenever
    the constraint set is not a singleton.
    """
    from .thermo import _edge_weights
    from .sft import higher_block_recode

    order = max(max(psi.order, g.order) - 1, 1)
    coding = higher_block_recode(sft, order)
    adj = coding.graph.allowed
    wg = _edge_weights(sft, g, coding)
    wp = _edge_weights(sft, psi, coding)
    pts = []
    for cycle in simple_cycles(adj, budget=cycle_budget):
        edges = list(zip(cycle, cycle[1:] + cycle[:1]))
        mg = sum(wg[u, v] for u, v in edges) / len(edges)
        mp = sum(wp[u, v] for u, v in edges) / len(edges)
        pts.append((mg, mp))
    pts.sort()
    lo = min(p[0] for p in pts)
    hi = max(p[0] for p in pts)
    if s < lo - 1e-9 or s > hi + 1e-9:
        raise LevelOutOfRange(f"s={s} outside the cycle-mean range [{lo}, {hi}]")
    # lower convex hull (Andrew's monotone chain, lower part)
    hull: list[tuple[float, float]] = []
    for p in pts:
        while len(hull) >= 2 and (
            (hull[-1][0] - hull[-2][0]) * (p[1] - hull[-2][1])
            - (p[0] - hull[-2][0]) * (hull[-1][1] - hull[-2][1])
            <= 0.0
        ):
            hull.pop()
        hull.append(p)
    xs = [p[0] for p in hull]
    s_clamped = min(max(s, xs[0]), xs[-1])
    j = max(0, min(len(xs) - 2, np.searchsorted(xs, s_clamped) - 1))
    x0, y0 = hull[j]
    x1, y1 = hull[j + 1]
    min_psi = y0 if x1 == x0 else y0 + (y1 - y0) * (s_clamped - x0) / (x1 - x0)
    return pressure(sft, psi) - min_psi


def _as_integer_values(values: np.ndarray, max_denominator: int = 1_000_000):
    """Common denominator rescaling of rational observable values."""
    fracs = [Fraction(float(v)).limit_denominator(max_denominator) for v in values]
    for v, f in zip(values, fracs):
        if abs(float(f) - float(v)) > 1e-12:
            raise ValueError(
                f"observable value {v} is not rational within denominator "
                f"{max_denominator}; exact DP needs integer-valued data"
            )
    denom = 1
    for f in fracs:
        denom = denom * f.denominator // math.gcd(denom, f.denominator)
    ints = np.array([int(f * denom) for f in fracs], dtype=np.int64)
    return ints, denom


def exact_sum_distribution(
    m: MarkovMeasure,
    g: LocallyConstantFunction,
    n: int,
    budget: int = 200_000_000,
) -> tuple[np.ndarray, int, int]:
    """Exact law of S_n g for integer-rescalable g, by dynamic programming.

    Returns (probabilities, offset, denominator): entry j is
    P(S_n g = (offset + j) / denominator). The DP state is (chain state,
    running integer sum); the table size n * span * states must fit the
    budget.
    """
    m = _aligned(m, g)
    gv = _state_weights(m, g)
    ints, denom = _as_integer_values(gv)
    lo, hi = int(ints.min()), int(ints.max())
    span = (hi - lo) * n + 1
    n_states = len(m.states)
    if span * n_states > budget:
        raise BudgetExceeded(
            f"DP table of {span * n_states} cells exceeds budget {budget}"
        )
    # running sums are stored rebased by -lo per window; the true offset n*lo
    # is restored in the return value
    table = np.zeros((n_states, span))
    for u in range(n_states):
        if m.stationary[u] > 0.0:
            table[u, int(ints[u] - lo)] = m.stationary[u]
    support = m.transition > 0.0
    for _ in range(n - 1):
        nxt = np.zeros_like(table)
        for v in range(n_states):
            srcs = np.flatnonzero(support[:, v])
            if len(srcs) == 0:
                continue
            acc = (m.transition[srcs, v][:, None] * table[srcs]).sum(axis=0)
            shift = int(ints[v] - lo)
            if shift == 0:
                nxt[v] += acc
            else:
                nxt[v, shift:] += acc[: span - shift]
        table = nxt
    dist = table.sum(axis=0)
    return dist, n * lo, denom


def exact_deviation_prob(
    m: MarkovMeasure,
    g: LocallyConstantFunction,
    n: int,
    threshold: float,
    budget: int = 200_000_000,
) -> float:
    """P(S_n g / n > threshold), exactly, via the sum-distribution DP."""
    if threshold >= g.max():
        return 0.0
    if threshold < g.min():
        return 1.0
    dist, offset, denom = exact_sum_distribution(m, g, n, budget=budget)
    sums = (offset + np.arange(len(dist))) / denom
    mask = sums / n > threshold
    return float(math.fsum(dist[mask].tolist()))


def exact_window_prob(
    m: MarkovMeasure,
    g: LocallyConstantFunction,
    n: int,
    lo: float,
    hi: float,
    closed: bool = False,
    budget: int = 200_000_000,
) -> float:
    """P(lo < S_n g / n < hi) (or closed endpoints), exactly."""
    dist, offset, denom = exact_sum_distribution(m, g, n, budget=budget)
    means = (offset + np.arange(len(dist))) / denom / n
    if closed:
        mask = (means >= lo) & (means <= hi)
    else:
        mask = (means > lo) & (means < hi)
    return float(math.fsum(dist[mask].tolist()))


def wilson_interval(hits: int, trials: int, z: float = 1.959963984540054):
    """95% Wilson score interval for a binomial proportion."""
    if trials == 0:
        return 0.0, 1.0
    phat = hits / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials**2)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class DeviationReport:
    """One deviation experiment: exact numbers, MC numbers, exponents."""

    horizon: int
    event: str
    exact_probability: float | None
    mc_estimate: float | None
    mc_interval: tuple[float, float] | None
    trials: int | None
    seed: int | None
    predicted_exponent: float | None
    measured_exponent: float | None
    slope_exponent: float | None
    zero_hits: bool = False
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "event": self.event,
            "exact_probability": self.exact_probability,
            "mc_estimate": self.mc_estimate,
            "mc_interval": list(self.mc_interval) if self.mc_interval else None,
            "trials": self.trials,
            "seed": self.seed,
            "predicted_exponent": self.predicted_exponent,
            "measured_exponent": self.measured_exponent,
            "slope_exponent": self.slope_exponent,
            "zero_hits": self.zero_hits,
            "metadata": self.metadata,
        }


def dp_exponent_slope(
    m: MarkovMeasure,
    g: LocallyConstantFunction,
    n: int,
    event_prob,
) -> float:
    """Finite-n decay exponent by a two-horizon slope of exact probabilities.

    [log p(n) - log p(n/2)] / (n - n/2) cancels the polynomial prefactor
    that contaminates (1/n) log p(n) at desk-scale horizons.
    """
    n_half = n // 2
    p_full = event_prob(n)
    p_half = event_prob(n_half)
    if p_full <= 0.0 or p_half <= 0.0:
        return -math.inf
    return (math.log(p_full) - math.log(p_half)) / (n - n_half)


def _window_sums(paths: np.ndarray, m: MarkovMeasure, g: LocallyConstantFunction) -> np.ndarray:
    """Birkhoff sums of g over n windows for each sampled path row."""
    k = g.order
    n = paths.shape[1] - k + 1
    if k == 1:
        lut = np.zeros(m.sft.alphabet_size)
        for w, v in zip(g.words, g.values):
            lut[w[0]] = v
        return lut[paths].sum(axis=1)
    # encode windows in base alphabet_size and look values up
    a = m.sft.alphabet_size
    if a**k > 1_000_000:
        raise BudgetExceeded(f"window lookup table {a}**{k} too large")
    codes = np.zeros((paths.shape[0], n), dtype=np.int64)
    for j in range(k):
        codes = codes * a + paths[:, j : j + n]
    lut = np.full(a**k, np.nan)
    for w, v in zip(g.words, g.values):
        code = 0
        for s in w:
            code = code * a + s
        lut[code] = v
    return np.nan_to_num(lut[codes]).sum(axis=1)


def mc_deviation_prob(
    m: MarkovMeasure,
    g: LocallyConstantFunction,
    n: int,
    threshold: float,
    trials: int,
    seed: int,
    rate: RateCurve | None = None,
    with_exact: bool = True,
) -> DeviationReport:
    """Monte Carlo estimate of P(S_n g / n > threshold) with a Wilson interval.

    The measured exponent is (1/n) log of the estimate; the slope exponent
    (two-horizon, exact DP) is attached when the DP budget allows, and the
    predicted exponent is -I(threshold) when a rate curve is supplied.
    """
    if not m.ergodic:
        raise NotErgodic("Monte Carlo deviation runs need an ergodic measure")
    paths = sample_paths(m, n + g.order - 1, trials, seed)
    sums = _window_sums(paths, m, g)
    hits = int((sums / n > threshold).sum())
    phat = hits / trials
    interval = wilson_interval(hits, trials)
    exact = None
    slope = None
    if with_exact:
        try:
            exact = exact_deviation_prob(m, g, n, threshold)
            slope = dp_exponent_slope(
                m, g, n, lambda nn: exact_deviation_prob(m, g, nn, threshold)
            )
        except BudgetExceeded:
            pass
    predicted = None
    if rate is not None:
        idx = int(np.argmin(np.abs(rate.levels - threshold)))
        predicted = -float(rate.values[idx])
    return DeviationReport(
        horizon=n,
        event=f"mean of {g.role} > {threshold}",
        exact_probability=exact,
        mc_estimate=phat,
        mc_interval=interval,
        trials=trials,
        seed=seed,
        predicted_exponent=predicted,
        measured_exponent=math.log(phat) / n if hits > 0 else None,
        slope_exponent=slope,
        zero_hits=hits == 0,
        metadata={"generator": "philox(seed, chunk)"},
    )


@dataclass(frozen=True)
class BallConstraint:
    """|eta[word] - center| < delta on empirical word frequencies."""

    word: Word
    center: float
    delta: float


@dataclass(frozen=True)
class Level2Rate:
    value: float
    witness: MarkovMeasure
    multipliers: tuple[float, ...]
    dual_value: float
    closed: bool


def level2_ball_rate(
    sft: SftGraph,
    psi: LocallyConstantFunction,
    constraints: list[BallConstraint],
    closed: bool = True,
    cap: float = Q_CAP,
    tol: float = 1e-8,
) -> Level2Rate:
    """Minimum of the rate functional over a finite-constraint weak* ball.

    Dual formulation: maximize over multipliers lambda the concave map
    sum_i [lambda_i c_i - |lambda_i| d_i] - pressure(psi + sum lambda_i f_i)
    + pressure(psi), with f_i the cylinder indicators (coordinate ascent,
    golden-section per coordinate). The witness is the equilibrium state at
    the optimum; the infimum over order-k Markov measures is exact because
    entropy maximization under depth-(k+1) frequency constraints is attained
    by an order-k chain and all data are locally constant.

    Open balls shrink delta by a relative 1e-9 (the closed/open distinction
    only matters on the boundary, which the slack absorbs).
    """
    if not constraints:
        raise ValueError("need at least one constraint")
    for c in constraints:
        if not is_admissible(sft, c.word) and c.center - c.delta > 0.0:
            raise Infeasible(f"word {c.word} is forbidden but needs positive mass")
    deltas = [c.delta if closed else c.delta * (1.0 - 1e-9) for c in constraints]
    inds = [indicator(sft, c.word) for c in constraints]
    P0 = pressure(sft, psi)

    def tilted_potential(lams):
        pot = psi
        for lam, f in zip(lams, inds):
            pot = pot + f * lam
        return pot

    def dual(lams) -> float:
        total = 0.0
        for lam, c, d in zip(lams, constraints, deltas):
            total += lam * c.center - abs(lam) * d
        return total - pressure(sft, tilted_potential(lams)) + P0

    lams = [0.0] * len(constraints)
    best = dual(lams)
    for sweep in range(200):
        improved = 0.0
        for i in range(len(lams)):

            def along(x):
                trial = list(lams)
                trial[i] = x
                return -dual(trial)

            x_star, neg = golden_minimize(along, -cap, cap, tol=1e-9)
            if -neg > best + 1e-15:
                improved += -neg - best
                best = -neg
                lams[i] = x_star
        if improved <= tol * 0.01:
            break
    # infeasibility shows up as the optimum pinned at the cap with the dual
    # still climbing
    for lam in lams:
        if abs(lam) >= cap * 0.999 and best > 10.0:
            raise Infeasible("dual unbounded: constraints unreachable")
    eq = equilibrium_state(sft, tilted_potential(lams))
    witness = eq.measure
    primal = P0 - markov_entropy(witness) - integrate(witness, psi)
    feasible = all(
        c.center - d - 1e-6 <= integrate(witness, f) <= c.center + d + 1e-6
        for c, d, f in zip(constraints, deltas, inds)
    )
    value = primal if feasible else max(best, 0.0)
    return Level2Rate(
        value=max(0.0, value),
        witness=witness,
        multipliers=tuple(lams),
        dual_value=max(best, 0.0),
        closed=closed,
    )


def level2_mc_test(
    m: MarkovMeasure,
    sft: SftGraph,
    psi: LocallyConstantFunction,
    constraints: list[BallConstraint],
    n: int,
    trials: int,
    seed: int,
) -> DeviationReport:
    """Empirical-measure ball membership probability vs level-2 predictions.

    Samples paths, tests every constraint on depth-|w| window frequencies,
    and reports the measured exponent against the open/closed ball rates.
    For a single constraint the exact window probability (DP) replaces the
    MC count in the exponent gate, removing sampling noise.
    """
    if not m.ergodic:
        raise NotErgodic("level-2 sampling needs an ergodic measure")
    k_max = max(len(c.word) for c in constraints)
    paths = sample_paths(m, n + k_max - 1, trials, seed)
    inside = np.ones(trials, dtype=bool)
    for c in constraints:
        f = indicator(sft, c.word)
        counts = _window_sums(paths[:, : n + len(c.word) - 1], m, f)
        inside &= np.abs(counts / n - c.center) < c.delta
    hits = int(inside.sum())
    phat = hits / trials
    closed_rate = level2_ball_rate(sft, psi, constraints, closed=True)
    open_rate = level2_ball_rate(sft, psi, constraints, closed=False)
    exact = None
    slope = None
    if len(constraints) == 1:
        c = constraints[0]
        f = indicator(sft, c.word)

        def event_prob(nn: int) -> float:
            return exact_window_prob(
                m, f, nn, c.center - c.delta, c.center + c.delta, closed=False
            )

        exact = event_prob(n)
        slope = dp_exponent_slope(m, f, n, event_prob)
    return DeviationReport(
        horizon=n,
        event=" & ".join(
            f"|eta[{''.join(map(str, c.word))}] - {c.center}| < {c.delta}"
            for c in constraints
        ),
        exact_probability=exact,
        mc_estimate=phat,
        mc_interval=wilson_interval(hits, trials),
        trials=trials,
        seed=seed,
        predicted_exponent=-closed_rate.value,
        measured_exponent=math.log(phat) / n if hits > 0 else None,
        slope_exponent=slope,
        zero_hits=hits == 0,
        metadata={
            "open_ball_exponent": -open_rate.value,
            "closed_ball_exponent": -closed_rate.value,
            "generator": "philox(seed, chunk)",
        },
    )


@dataclass(frozen=True, eq=False)
class WeakGibbsAudit:
    """Per-length Gibbs constants with masses, for tail-constant estimates.

    tables[n] = (log_constants, masses) over positive-mass n-words, where
    log_constants = |log ratio| >= 0. normalized_max[n] is the worst
    (1/n) log C_n(w); a measure is weak Gibbs against psi exactly when this
    sequence dies out.
    """

    lengths: tuple[int, ...]
    tables: dict
    pressure: float
    truncated: bool

    def normalized_max(self) -> dict:
        return {
            n: float(np.max(logc) / n) for n, (logc, _) in self.tables.items()
        }

    def exceedance_mass(self, n: int, delta: float) -> float:
        logc, mass = self.tables[n]
        return float(mass[logc > delta * n].sum())

    def subexponential(self, threshold: float = 0.01) -> bool:
        norm = self.normalized_max()
        last = norm[max(self.lengths)]
        return last < threshold


def weak_gibbs_audit(
    m: MarkovMeasure,
    psi: LocallyConstantFunction,
    n_max: int,
    budget: int = 10_000_000,
) -> WeakGibbsAudit:
    """Audit the weak-Gibbs inequality of a measure against a potential.

    Constants are taken at the symbolic scale, where dynamic balls are
    cylinders and the comparison scale is fixed by the generating partition.
    """
    tables, truncated, P = gibbs_word_tables(m, psi, n_max, budget=budget)
    out = {}
    for n, (logmass, logratio) in tables.items():
        out[n] = (np.abs(logratio), np.exp(logmass))
    return WeakGibbsAudit(
        lengths=tuple(sorted(out)),
        tables=out,
        pressure=P,
        truncated=truncated,
    )


def weak_gibbs_audit_sampled(
    m: MarkovMeasure,
    psi: LocallyConstantFunction,
    lengths,
    samples: int,
    seed: int,
) -> WeakGibbsAudit:
    """Orbit-sampled audit for depths where word enumeration is infeasible.

    Words are drawn from the measure itself (independent sampled paths), so
    each sample carries mass 1/samples and exceedance masses become empirical
    frequencies. Constants per word are exact; only the mass table is
    estimated, with the usual 1/sqrt(samples) confidence.
    """
    lengths = sorted(int(n) for n in lengths)
    n_top = lengths[-1]
    k = max(psi.order, m.block_order)
    paths = sample_paths(m, n_top + k, samples, seed)
    P = pressure(m.sft, psi)
    from .measures import word_probability

    tables = {}
    for n in lengths:
        logc = np.empty(samples)
        for i in range(samples):
            w = tuple(int(s) for s in paths[i, :n])
            mass = word_probability(m, w)
            s_birk = sum(
                psi.value(w[j : j + psi.order]) for j in range(0, n - psi.order + 1)
            )
            logc[i] = abs(math.log(mass) + n * P - s_birk)
        tables[n] = (logc, np.full(samples, 1.0 / samples))
    return WeakGibbsAudit(
        lengths=tuple(lengths),
        tables=tables,
        pressure=P,
        truncated=True,
    )


def c_infinity_estimate(
    audit: WeakGibbsAudit,
    delta_grid,
    tail_lengths: int = 3,
) -> float:
    """Tail constant of the weak-Gibbs property from the audit tables.

    For each delta the inner limsup is estimated by the worst
    (1/n) log mass{C_n > exp(delta n)} over the last few audited lengths;
    the returned value is the estimate at the smallest delta. Empty
    exceedance sets at every tail length give the -inf sentinel: for strict
    Gibbs inputs the constants are bounded, the sets empty out at an
    explicit length, and the level-2 upper bound degenerates to the plain
    rate-functional infimum.
    """
    deltas = sorted(float(d) for d in delta_grid)
    if not deltas:
        raise ValueError("need at least one delta")
    tail = sorted(audit.lengths)[-tail_lengths:]
    estimates = {}
    for d in deltas:
        vals = []
        for n in tail:
            mass = audit.exceedance_mass(n, d)
            vals.append(math.log(mass) / n if mass > 0.0 else -math.inf)
        estimates[d] = min(max(vals), 0.0)
    return estimates[deltas[0]]


def level2_upper_bound(ball_rate_value: float, c_infinity: float) -> float:
    """max(-inf rate, c_infinity): the level-2 upper-bound exponent."""
    return max(-ball_rate_value, c_infinity)
