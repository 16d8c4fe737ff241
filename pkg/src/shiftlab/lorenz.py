"""A concrete Lorenz-type Poincare family with exact symbolic structure.

The section map is the skew product P(x, y) = (f(x), H(x, y)) on
[-1, 1]^2 minus the singular line x = 0, with

    f(x) = sign(x) (2 |x|^alpha - 1),      alpha in (1/sqrt(2), 1),
    H(x, y) = sign(x) (beta y - gamma),    0 < beta < gamma, beta + gamma < 1.

Both branches of f are full, so the quotient dynamics is conjugate to the
full 2-shift and every symbolic computation applies without approximation.
The first-return time near a hyperbolic saddle grows like -log|x| / lam3;
the roof used in flow averages is that law capped at a configurable height.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    HitSingularLine,
    NotBranchConstant,
    ParamOutOfRange,
    UnderflowDepth,
)
from .measures import stream_rng

SQRT2 = math.sqrt(2.0)

REFERENCE_PARAMS = {
    "alpha": 0.75,
    "beta": 0.25,
    "gamma": 0.5,
    "lam1": -3.0,
    "lam2": -1.0,
    "lam3": 2.0,
    "roof_base": 1.0,
    "roof_cap": 30.0,
}


@dataclass(frozen=True)
class LorenzModel:
    alpha: float
    beta: float
    gamma: float
    lam1: float
    lam2: float
    lam3: float
    roof_base: float
    roof_cap: float

    # -- one-dimensional quotient map ------------------------------------
    def f(self, x):
        x = np.asarray(x, dtype=float)
        return np.sign(x) * (2.0 * np.abs(x) ** self.alpha - 1.0)

    def f_scalar(self, x: float) -> float:
        if x > 0.0:
            return 2.0 * x**self.alpha - 1.0
        if x < 0.0:
            return -(2.0 * (-x) ** self.alpha - 1.0)
        return 0.0

    def f_derivative(self, x):
        x = np.asarray(x, dtype=float)
        return 2.0 * self.alpha * np.abs(x) ** (self.alpha - 1.0)

    def branch_inverse(self, symbol: int, u):
        """Inverse of the L (0) or R (1) branch, increasing on [-1, 1]."""
        u = np.asarray(u, dtype=float)
        if symbol == 1:
            return ((u + 1.0) / 2.0) ** (1.0 / self.alpha)
        return -(((1.0 - u) / 2.0) ** (1.0 / self.alpha))

    # -- fiber map ---------------------------------------------------------
    def h(self, x, y):
        return np.sign(x) * (self.beta * np.asarray(y, dtype=float) - self.gamma)

    # -- return-time roof ----------------------------------------------------
    def roof(self, x):
        """Capped singular roof min(c0 - log|x| / lam3, cap); positive off x=0."""
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            raw = self.roof_base - np.log(np.abs(x)) / self.lam3
        return np.minimum(raw, self.roof_cap)

    def uncapped_roof_radius(self) -> float:
        """|x| below which the cap is active: exp(lam3 (c0 - M))."""
        return math.exp(self.lam3 * (self.roof_base - self.roof_cap))


def validate_model(
    alpha: float,
    beta: float,
    gamma: float,
    lam1: float,
    lam2: float,
    lam3: float,
    roof_base: float = 1.0,
    roof_cap: float = 30.0,
    audit_points: int = 100_000,
) -> LorenzModel:
    """Check every defining clause, analytically and on a dense grid.

    Raises ParamOutOfRange naming the violated clause.
    """
    if not (SQRT2 / 2.0 < alpha < 1.0):
        raise ParamOutOfRange(
            f"branch exponent alpha={alpha}: need 2*alpha > sqrt(2) and alpha < 1 "
            "(expansion clause f' > sqrt(2))"
        )
    if not (0.0 < beta < 1.0):
        raise ParamOutOfRange(f"fiber contraction beta={beta} must lie in (0, 1)")
    if not (gamma > beta):
        raise ParamOutOfRange(
            f"fiber offset gamma={gamma} must exceed beta={beta}: the image of a "
            "branch must stay strictly on one side of 0 (sign clause)"
        )
    if not (beta + gamma < 1.0):
        raise ParamOutOfRange(
            f"beta + gamma = {beta + gamma} must stay below 1 so the fiber image "
            "remains inside (-1, 1)"
        )
    if not (lam1 < lam2 < 0.0 < lam3):
        raise ParamOutOfRange(
            f"eigenvalues ({lam1}, {lam2}, {lam3}) must satisfy lam1 < lam2 < 0 < lam3"
        )
    if not (lam1 + lam3 < 0.0):
        raise ParamOutOfRange(f"lam1 + lam3 = {lam1 + lam3} must be negative")
    if not (lam2 + lam3 > 0.0):
        raise ParamOutOfRange(f"lam2 + lam3 = {lam2 + lam3} must be positive")
    if not (roof_base > 0.0 and roof_cap >= roof_base):
        raise ParamOutOfRange("roof parameters require cap >= base > 0")
    model = LorenzModel(alpha, beta, gamma, lam1, lam2, lam3, roof_base, roof_cap)
    # dense-grid audit of the map clauses
    xs = np.linspace(-1.0, 1.0, audit_points)
    xs = xs[np.abs(xs) > 1e-12]
    fx = model.f(xs)
    interior = np.abs(xs) < 1.0
    if not np.all(np.abs(fx[interior]) < 1.0):
        raise ParamOutOfRange("grid audit: f leaves (-1, 1) on an open branch")
    if not np.all(model.f_derivative(xs) > SQRT2):
        raise ParamOutOfRange("grid audit: derivative drops to sqrt(2) or below")
    ys = np.linspace(-1.0, 1.0, 101)
    hx = model.h(xs[:, None], ys[None, :])
    pos = xs > 0
    if not (np.all(hx[pos] < 0.0) and np.all(hx[pos] > -1.0)):
        raise ParamOutOfRange("grid audit: fiber image for x > 0 leaves (-1, 0)")
    if not (np.all(hx[~pos] > 0.0) and np.all(hx[~pos] < 1.0)):
        raise ParamOutOfRange("grid audit: fiber image for x < 0 leaves (0, 1)")
    if not np.all(model.roof(xs) >= roof_base):
        raise ParamOutOfRange("grid audit: roof drops below its base value")
    return model


def reference_model() -> LorenzModel:
    return validate_model(**REFERENCE_PARAMS)


def poincare_step(model: LorenzModel, state: tuple[float, float]) -> tuple[float, float]:
    """One Poincare return. Raises HitSingularLine when the image x is 0
    to machine precision (the orbit would enter the singular line)."""
    x, y = state
    if x == 0.0:
        raise HitSingularLine("state on the singular line x = 0")
    fx = model.f_scalar(x)
    if abs(fx) < 1e-15:
        raise HitSingularLine(f"f(x) = {fx:.3e} at machine precision for x = {x!r}")
    return fx, float(model.h(x, y))


def quotient_orbit(
    model: LorenzModel, x0: float, n: int, perturb: bool = True
) -> tuple[np.ndarray, int]:
    """Orbit x_0 .. x_{n-1} of the quotient map.

    Points within one ulp of the singular line are nudged by one ulp and
    counted (measure-zero event; long Monte Carlo runs must not abort).
    With perturb=False the orbit raises HitSingularLine instead.
    """
    xs = np.empty(n)
    x = float(x0)
    perturbed = 0
    for k in range(n):
        if abs(x) < 1e-15:
            if not perturb:
                raise HitSingularLine(f"orbit hit x = 0 at step {k}")
            x = math.ulp(1.0) if x >= 0.0 else -math.ulp(1.0)
            perturbed += 1
        xs[k] = x
        x = model.f_scalar(x)
    return xs, perturbed


def orbit(
    model: LorenzModel, state: tuple[float, float], n: int, perturb: bool = True
) -> tuple[np.ndarray, np.ndarray, int]:
    """Full section orbit (x_k, y_k), k < n, with the same ulp-nudge policy."""
    xs = np.empty(n)
    ys = np.empty(n)
    x, y = float(state[0]), float(state[1])
    perturbed = 0
    for k in range(n):
        if abs(x) < 1e-15:
            if not perturb:
                raise HitSingularLine(f"orbit hit x = 0 at step {k}")
            x = math.ulp(1.0) if x >= 0.0 else -math.ulp(1.0)
            perturbed += 1
        xs[k] = x
        ys[k] = y
        fx = model.f_scalar(x)
        y = float(model.h(x, y))
        x = fx
    return xs, ys, perturbed


def itinerary(model: LorenzModel, x0: float, n: int) -> np.ndarray:
    """Branch symbols of the orbit: 0 for x < 0, 1 for x > 0.

    An exact hit of the boundary x = 0 takes the right-branch symbol
    (right-continuity convention) and continues at f(0+) = -1.
    """
    symbols = np.empty(n, dtype=np.int8)
    x = float(x0)
    for k in range(n):
        if x > 0.0:
            symbols[k] = 1
            x = model.f_scalar(x)
        elif x < 0.0:
            symbols[k] = 0
            x = model.f_scalar(x)
        else:
            symbols[k] = 1
            x = -1.0
    return symbols


def _normalize_word(word) -> tuple[int, ...]:
    if isinstance(word, str):
        table = {"L": 0, "R": 1, "0": 0, "1": 1}
        return tuple(table[c] for c in word)
    return tuple(int(s) for s in word)


def inverse_branch(model: LorenzModel, word) -> tuple[float, float]:
    """Maximal interval of starting points whose itinerary begins with ``word``.

    Backward iteration of the two increasing branch inverses; interval
    length contracts at least geometrically in the word length.
    """
    w = _normalize_word(word)
    n = len(w)
    if (2.0 * model.alpha) ** (-n) < 1e-14:
        raise UnderflowDepth(f"depth {n} is below floating-point resolution")
    lo, hi = -1.0, 1.0
    for sym in reversed(w):
        lo = float(model.branch_inverse(sym, lo))
        hi = float(model.branch_inverse(sym, hi))
    return lo, hi


def branch_intervals(model: LorenzModel, depth: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Endpoints of all 2^depth itinerary cylinders, vectorized.

    Returns (words, lo, hi) with words a (2^depth, depth) 0/1 array in
    lexicographic order.
    """
    if (2.0 * model.alpha) ** (-depth) < 1e-14:
        raise UnderflowDepth(f"depth {depth} is below floating-point resolution")
    count = 2**depth
    bits = ((np.arange(count)[:, None] >> np.arange(depth)[::-1]) & 1).astype(np.int8)
    lo = np.full(count, -1.0)
    hi = np.full(count, 1.0)
    for col in range(depth - 1, -1, -1):
        sym = bits[:, col]
        for s in (0, 1):
            mask = sym == s
            lo[mask] = model.branch_inverse(s, lo[mask])
            hi[mask] = model.branch_inverse(s, hi[mask])
    return bits, lo, hi


def cylinder_midpoints(model: LorenzModel, depth: int) -> np.ndarray:
    _, lo, hi = branch_intervals(model, depth)
    return np.sort(0.5 * (lo + hi))


def quotient_orbit_matrix(model: LorenzModel, xs, t: int) -> np.ndarray:
    """Forward orbit coordinates (len(xs), t) of the quotient map, vectorized.

    Exact zeros are nudged by one ulp, matching the scalar orbit policy.
    """
    x = np.asarray(xs, dtype=float).copy()
    out = np.empty((len(x), t))
    for k in range(t):
        tiny = np.abs(x) < 1e-15
        if tiny.any():
            x[tiny] = np.where(x[tiny] >= 0.0, math.ulp(1.0), -math.ulp(1.0))
        out[:, k] = x
        x = model.f(x)
    return out


def quotient_spectrum_transfer(model: LorenzModel, g, a_grid):
    """Level-set spectrum of a branch-constant observable, through the coding.

    ``g`` is a callable on section points (x, y). It must be constant on each
    branch (NotBranchConstant otherwise); its two values push forward to an
    order-1 function on the full 2-shift, where the Legendre machinery is
    exact. The curve is tagged with the symbolic route.
    """
    from .functions import from_dict
    from .sft import full_shift
    from .thermo import legendre_spectrum

    xs_neg = np.linspace(-0.9, -0.1, 9)
    xs_pos = np.linspace(0.1, 0.9, 9)
    ys = np.linspace(-0.9, 0.9, 5)
    vals_neg = {float(g(x, y)) for x in xs_neg for y in ys}
    vals_pos = {float(g(x, y)) for x in xs_pos for y in ys}

    def _collapse(vals, side):
        arr = sorted(vals)
        if arr[-1] - arr[0] > 1e-12:
            raise NotBranchConstant(
                f"observable varies on the {side} branch: range {arr[0]}..{arr[-1]}"
            )
        return 0.5 * (arr[0] + arr[-1])

    g_left = _collapse(vals_neg, "left")
    g_right = _collapse(vals_pos, "right")
    shift = full_shift(2)
    g_symbolic = from_dict(shift, {(0,): g_left, (1,): g_right})
    curve = legendre_spectrum(shift, g_symbolic, a_grid)
    curve.metadata["route"] = "via symbolic conjugacy"
    curve.metadata["model"] = {
        "alpha": model.alpha,
        "beta": model.beta,
        "gamma": model.gamma,
    }
    return curve


@dataclass(frozen=True)
class FlowAverageResult:
    value: float
    returns: int
    perturbed: int


def flow_average(
    model: LorenzModel,
    state: tuple[float, float],
    n_returns: int,
    g,
    use_roof: bool = True,
) -> FlowAverageResult:
    """Roof-weighted Birkhoff average over Poincare returns.

    Approximates the continuous-time average of a section-constant flow
    observable: sum g(s_k) roof(s_k) / sum roof(s_k). With use_roof=False the
    plain section average is returned.
    """
    xs, ys, perturbed = orbit(model, state, n_returns)
    gv = np.array([float(g(x, y)) for x, y in zip(xs, ys)])
    if use_roof:
        w = model.roof(xs)
    else:
        w = np.ones_like(xs)
    return FlowAverageResult(
        value=float((gv * w).sum() / w.sum()),
        returns=n_returns,
        perturbed=perturbed,
    )


def fiber_contraction_audit(
    model: LorenzModel, x0: float, y0: float, y1: float, n: int
) -> np.ndarray:
    """Fiber distance ratios |y_k - y'_k| / |y_0 - y'_0| along one x-orbit.

    H is affine in y with slope of modulus beta, so the ratio sequence equals
    beta^k exactly; the audit returns the measured ratios for comparison.
    """
    if y0 == y1:
        raise ValueError("need two distinct fiber points")
    xs, _ = quotient_orbit(model, x0, n + 1)
    a, b = float(y0), float(y1)
    ratios = np.empty(n + 1)
    ratios[0] = 1.0
    d0 = abs(a - b)
    for k in range(1, n + 1):
        a = float(model.h(xs[k - 1], a))
        b = float(model.h(xs[k - 1], b))
        ratios[k] = abs(a - b) / d0
    return ratios


def acim_proxy(
    model: LorenzModel,
    order: int,
    n_samples: int,
    seed: int,
    burn_in: int = 1000,
):
    """Symbolic stand-in for the quotient map's physical measure.

    A long generic orbit supplies empirical cylinder frequencies at depth
    order+1; their max-entropy Markov extension is the proxy measure. The
    capped roof is projected to a locally constant function of the same
    order by evaluation at cylinder midpoints. Returns (measure, roof_lc).
    """
    from .approx import markovization
    from .functions import from_dict
    from .measures import marginals_from_tables
    from .sft import full_shift

    rng = stream_rng(seed, 0)
    x0 = float(rng.uniform(-1.0, 1.0))
    xs, _ = quotient_orbit(model, x0, burn_in + n_samples)
    symbols = (xs[burn_in:] > 0).astype(np.int8)
    depth = order + 1
    tables = []
    for k in range(1, depth + 1):
        windows = np.lib.stride_tricks.sliding_window_view(symbols, k)
        words, counts = np.unique(windows, axis=0, return_counts=True)
        total = counts.sum()
        tables.append(
            {tuple(int(s) for s in w): c / total for w, c in zip(words, counts)}
        )
    marg = marginals_from_tables(2, tables)
    shift = full_shift(2)
    # empirical tables carry O(1/n) shift-invariance noise; the conditional
    # chain restores exact stationarity
    measure = markovization(marg, shift, tol=0.05)
    from .sft import admissible_words

    roof_table = {}
    for w in admissible_words(shift, order):
        lo, hi = inverse_branch(model, w)
        roof_table[w] = float(model.roof(0.5 * (lo + hi)))
    roof_lc = from_dict(shift, roof_table, role="roof")
    return measure, roof_lc
