"""End-to-end acceptance gates.

One test per criterion, each asserting its stated tolerances and printing a
single PASS line (run with ``pytest -s tests/test_acceptance.py`` to see
them). Stated runtime budgets are asserted with ``time.monotonic``.

Criterion 6 carries one sub-clause that is mathematically unattainable for
this map family (see ``test_criterion_06b``): it is implemented as stated
and left red rather than weakened.
"""

import json
import math
import time

import numpy as np
import pytest

from shiftlab.approx import (
    entropy_dense_approx,
    markovization,
    nested_horseshoe_sequence,
    sub_sft_contains,
)
from shiftlab.errors import BadSchedule
from shiftlab.functions import constant, from_dict, indicator
from shiftlab.ldp import (
    BallConstraint,
    c_infinity_estimate,
    dp_exponent_slope,
    exact_deviation_prob,
    exact_window_prob,
    level1_rate,
    level2_ball_rate,
    mc_deviation_prob,
    weak_gibbs_audit,
)
from shiftlab.lorenz import (
    branch_intervals,
    cylinder_midpoints,
    itinerary,
    poincare_step,
    quotient_orbit_matrix,
    reference_model,
)
from shiftlab.measures import (
    CylinderMarginals,
    bernoulli_measure,
    cylinder_marginals,
    integrate,
    markov_entropy,
    mixture_marginals,
    parry_measure,
    stream_rng,
)
from shiftlab.sft import full_shift, golden_mean_shift
from shiftlab.suspension import (
    SuspensionSystem,
    abramov_entropy,
    flow_level_spectrum,
    flow_topological_entropy,
    irregular_point,
    separated_set_entropy,
)
from shiftlab.thermo import (
    constrained_entropy_oracle,
    equilibrium_state,
    gibbs_constant_audit,
    legendre_spectrum,
    pressure,
)

PHI = (1.0 + math.sqrt(5.0)) / 2.0
LOG_PHI = math.log(PHI)


def binary_entropy(a: float) -> float:
    if a in (0.0, 1.0):
        return 0.0
    return -a * math.log(a) - (1 - a) * math.log(1 - a)


def test_criterion_01_pressure_closed_forms():
    t0 = time.monotonic()
    fs = full_shift(2)
    g1 = indicator(fs, (1,))
    for q in (-2.0, -1.0, 0.0, 1.0, 2.0):
        assert abs(pressure(fs, g1 * q) - math.log(1 + math.exp(q))) <= 1e-10
    gm = golden_mean_shift()
    assert abs(pressure(gm, constant(gm, 0.0)) - LOG_PHI) <= 1e-10
    elapsed = time.monotonic() - t0
    assert elapsed < 1.0
    print(f"PASS criterion-01 pressure closed forms ({elapsed:.3f}s)")


def test_criterion_02_variational_identity():
    fs, gm, f3 = full_shift(2), golden_mean_shift(), full_shift(3)
    matrix = [
        (fs, constant(fs, 0.0)),
        (fs, indicator(fs, (1,)) * -2.0),
        (fs, indicator(fs, (1,)) * 1.0),
        (fs, indicator(fs, (1,)) * 2.0),
        (fs, from_dict(fs, {(0, 0): 0.3, (0, 1): -0.2, (1, 0): 0.5, (1, 1): 0.0})),
        (gm, constant(gm, 0.0)),
        (gm, indicator(gm, (1,)) * 1.5),
        (gm, from_dict(gm, {(0, 0): -0.7, (0, 1): 0.4, (1, 0): 0.2})),
        (f3, indicator(f3, (2,)) * 0.8),
        (f3, constant(f3, -1.0)),
    ]
    worst = 0.0
    for sft, psi in matrix:
        eq = equilibrium_state(sft, psi)
        residual = abs(
            markov_entropy(eq.measure) + integrate(eq.measure, psi) - eq.pressure
        )
        worst = max(worst, residual)
        assert residual <= 1e-8
    print(f"PASS criterion-02 variational identity (worst residual {worst:.2e})")


def test_criterion_03_level_set_variational_principle():
    t0 = time.monotonic()
    fs, gm = full_shift(2), golden_mean_shift()
    g_fs, g_gm = indicator(fs, (1,)), indicator(gm, (1,))
    # 41-point grids containing the unconstrained maximizer level
    grid_fs = np.linspace(0.05, 0.95, 41)
    a_star_gm = integrate(parry_measure(gm), g_gm)
    grid_gm = np.sort(np.append(np.linspace(0.02, 0.475, 40), a_star_gm))
    for sft, g, grid, h_top in (
        (fs, g_fs, grid_fs, math.log(2)),
        (gm, g_gm, grid_gm, LOG_PHI),
    ):
        curve = legendre_spectrum(sft, g, grid)
        oracle = np.array(
            [constrained_entropy_oracle(sft, g, float(a)) for a in grid]
        )
        assert np.abs(curve.values - oracle).max() <= 1e-6
        assert abs(curve.values.max() - h_top) <= 1e-8
    quarter = legendre_spectrum(fs, g_fs, [0.25]).values[0]
    assert abs(quarter - binary_entropy(0.25)) <= 1e-9
    elapsed = time.monotonic() - t0
    assert elapsed < 10.0
    print(f"PASS criterion-03 level-set variational principle ({elapsed:.2f}s)")


def test_criterion_04_suspension_flow_entropy():
    fs = full_shift(2)
    roof = (constant(fs, 1.0) + indicator(fs, (1,))).with_role("roof")
    susp = SuspensionSystem(base=fs, roof=roof)
    s_star = flow_topological_entropy(susp)
    assert abs(s_star - LOG_PHI) <= 1e-10
    eq = equilibrium_state(fs, roof * (-s_star))
    assert abs(abramov_entropy(eq.measure, roof) - s_star) <= 1e-8
    for c in (1.0, 2.0):
        const_susp = SuspensionSystem(base=fs, roof=constant(fs, c, role="roof"))
        assert abs(flow_topological_entropy(const_susp) - math.log(2) / c) <= 1e-10
    grid = [0.2, 0.5, 0.8]
    one = SuspensionSystem(base=fs, roof=constant(fs, 1.0, role="roof"))
    reduction = flow_level_spectrum(one, indicator(fs, (1,)), grid)
    base = legendre_spectrum(fs, indicator(fs, (1,)), grid)
    assert np.abs(reduction.values - base.values).max() <= 1e-10
    print(f"PASS criterion-04 suspension flow entropy (s* err {abs(s_star-LOG_PHI):.2e})")


def test_criterion_05_irregular_set_construction():
    r = irregular_point(4.0, 10)
    assert abs(r.measured_liminf - 0.2) <= 0.02
    assert abs(r.measured_limsup - 0.8) <= 0.02
    with pytest.raises(BadSchedule):
        irregular_point(1.0, 10)
    print(
        "PASS criterion-05 irregular construction "
        f"(measured {r.measured_liminf:.4f}/{r.measured_limsup:.4f})"
    )


def test_criterion_06_lorenz_model():
    t0 = time.monotonic()
    model = reference_model()
    fp = (1.0, -2.0 / 3.0)
    image = poincare_step(model, fp)
    assert abs(image[0] - fp[0]) <= 1e-12 and abs(image[1] - fp[1]) <= 1e-12
    # 10^4 itinerary / inverse-branch round trips at depth 12
    depth = 12
    rng = stream_rng(20260810, 0)
    xs = rng.uniform(-1.0, 1.0, 10_000)
    bits, lo, hi = branch_intervals(model, depth)
    codes = (bits * (2 ** np.arange(depth - 1, -1, -1))).sum(axis=1)
    lut_lo = np.empty(2**depth)
    lut_hi = np.empty(2**depth)
    lut_lo[codes] = lo
    lut_hi[codes] = hi
    weights = 2 ** np.arange(depth - 1, -1, -1)
    for x in xs:
        w = itinerary(model, float(x), depth)
        code = int((w * weights).sum())
        assert lut_lo[code] - 1e-12 <= x <= lut_hi[code] + 1e-12
    # quotient separated-set entropy
    mids = cylinder_midpoints(model, 16)
    res = separated_set_entropy(
        lambda pts, t: quotient_orbit_matrix(model, pts, t), 16, 1e-3, mids
    )
    assert abs(res.entropy - math.log(2)) <= 0.05
    elapsed = time.monotonic() - t0
    assert elapsed < 60.0
    print(
        f"PASS criterion-06 Lorenz model (sep entropy {res.entropy:.4f}, "
        f"{elapsed:.1f}s)"
    )


def test_criterion_06b_cylinder_length_bound_as_stated():
    """Depth-12 cylinder lengths bounded by (2 alpha)^-12 -- as stated.

    This clause is unattainable for any quotient map of this family: the
    widest depth-12 cylinder hugs the fixed point at x = 1 where the
    derivative is exactly 2 alpha, and only 11 derivative factors act on a
    depth-12 word (its image under f^11 is one full branch). The provable
    certificate is (2 alpha)^-(n-1) per unit branch length, which the
    intervals do satisfy (see test_branch_intervals_cover_and_contract).
    Kept red intentionally instead of loosening the stated bound.
    """
    model = reference_model()
    _, lo, hi = branch_intervals(model, 12)
    max_len = float((hi - lo).max())
    assert max_len <= 1.5**-12, (
        f"stated bound 1.5^-12 = {1.5**-12:.6f} vs actual max cylinder length "
        f"{max_len:.6f}; the attainable certificate is 2*(2a)^-(n-1) = "
        f"{2 * 1.5**-11:.6f}"
    )
    print("PASS criterion-06b cylinder bound")


def test_criterion_07_level1_large_deviations():
    fs = full_shift(2)
    b = bernoulli_measure(fs, [0.5, 0.5])
    g1 = indicator(fs, (1,))
    curve = level1_rate(b, g1, [0.75])
    i34 = math.log(2) - binary_entropy(0.75)
    assert abs(curve.values[0] - i34) <= 1e-9
    p = exact_deviation_prob(b, g1, 20, 0.7)
    assert abs(p - 21700 / 2**20) <= 1e-12 * (21700 / 2**20)
    slope = dp_exponent_slope(
        b, g1, 24, lambda n: exact_deviation_prob(b, g1, n, 0.75)
    )
    assert abs(slope - (-i34)) <= 0.05
    report = mc_deviation_prob(b, g1, 20, 0.7, 10**6, seed=20260809)
    lo, hi = report.mc_interval
    assert lo <= report.exact_probability <= hi
    print(
        f"PASS criterion-07 level-1 LD (I(3/4) err {abs(curve.values[0]-i34):.1e}, "
        f"slope gap {abs(slope + i34):.4f}, MC in interval)"
    )


def test_criterion_08_level2_sandwich():
    fs = full_shift(2)
    b = bernoulli_measure(fs, [0.5, 0.5])
    psi0 = constant(fs, 0.0)
    g1 = indicator(fs, (1,))
    ball = [BallConstraint((1,), 0.75, 0.02)]
    closed = level2_ball_rate(fs, psi0, ball, closed=True)
    opened = level2_ball_rate(fs, psi0, ball, closed=False)
    slope = dp_exponent_slope(
        b,
        g1,
        24,
        lambda n: exact_window_prob(b, g1, n, 0.73, 0.77, closed=False),
    )
    lo = min(-closed.value, -opened.value) - 0.06
    hi = max(-closed.value, -opened.value) + 0.06
    assert lo <= slope <= hi
    level1 = level1_rate(b, g1, [0.73]).values[0]
    assert abs(closed.value - level1) <= 2e-3
    print(
        f"PASS criterion-08 level-2 sandwich (DP slope {slope:.4f} in "
        f"[{lo:.4f}, {hi:.4f}], contraction gap {abs(closed.value-level1):.1e})"
    )


def test_criterion_09_gibbs_audits():
    fs, gm = full_shift(2), golden_mean_shift()
    p = 0.3
    bp = bernoulli_measure(fs, [1 - p, p])
    psi_p = from_dict(fs, {(0,): math.log(1 - p), (1,): math.log(p)})
    audit = gibbs_constant_audit(bp, psi_p, 12)
    assert np.abs(audit.max_ratio - 1.0).max() <= 1e-12
    assert np.abs(audit.min_ratio - 1.0).max() <= 1e-12
    psi0 = constant(gm, 0.0)
    eq = equilibrium_state(gm, psi0)
    audit_gm = gibbs_constant_audit(parry_measure(gm), psi0, 18, eigendata=eq)
    assert audit_gm.max_ratio.max() <= PHI  # eigenvector-ratio constant
    assert (audit_gm.max_ratio <= audit_gm.envelope_hi * (1 + 1e-9)).all()
    assert (audit_gm.min_ratio >= audit_gm.envelope_lo * (1 - 1e-9)).all()
    # tail constant: -inf sentinel for strict Gibbs inputs
    b = bernoulli_measure(fs, [0.5, 0.5])
    wa = weak_gibbs_audit(b, constant(fs, 0.0), 14)
    assert c_infinity_estimate(wa, [0.01, 0.05]) == -math.inf
    wa_gm = weak_gibbs_audit(parry_measure(gm), psi0, 18)
    assert c_infinity_estimate(wa_gm, [0.06, 0.12]) == -math.inf
    psi_bad = from_dict(fs, {(0,): math.log(0.7), (1,): math.log(0.3)})
    wa_bad = weak_gibbs_audit(b, psi_bad, 14)
    c_bad = c_infinity_estimate(wa_bad, [0.01, 0.05, 0.1])
    assert np.isfinite(c_bad) and c_bad <= 0.0
    print("PASS criterion-09 Gibbs audits (sentinels and envelopes hold)")


def test_criterion_10_entropy_denseness():
    fs = full_shift(2)
    d0 = bernoulli_measure(fs, [1.0, 0.0])
    b = bernoulli_measure(fs, [0.5, 0.5])
    target = mixture_marginals(
        [cylinder_marginals(d0, 3), cylinder_marginals(b, 3)], [0.5, 0.5]
    )
    chain = markovization(CylinderMarginals(2, 2, target.tables[:2]), fs)
    assert chain.transition[0, 0] == 5.0 / 6.0  # exact
    witness, cert = entropy_dense_approx(target, fs, 0.05)
    assert witness.ergodic
    assert cert.dstar < 0.05
    assert cert.entropy >= 0.5 * math.log(2)
    print(
        f"PASS criterion-10 entropy denseness (d* {cert.dstar:.4f}, "
        f"h {cert.entropy:.4f})"
    )


def test_criterion_11_nested_horseshoes():
    fs = full_shift(2)
    stages = nested_horseshoe_sequence(fs, 8)
    entropies = [s.entropy() for s in stages]
    assert math.log(2) - entropies[-1] < 0.01
    for prev, nxt in zip(stages, stages[1:]):
        assert sub_sft_contains(nxt, prev)
    assert all(s.graph.transitive for s in stages)
    assert all(s.is_proper() for s in stages)
    print(
        f"PASS criterion-11 nested horseshoes (gap {math.log(2)-entropies[-1]:.5f})"
    )


def test_criterion_12_determinism(tmp_path):
    from shiftlab.cli import run

    configs = [
        {
            "kind": "entropy",
            "system": {"preset": "golden-mean"},
            "output_dir": str(tmp_path / "c-entropy"),
        },
        {
            "kind": "pressure",
            "system": {"preset": "full-2"},
            "parameters": {"potential": {"indicator": "1"}},
            "output_dir": str(tmp_path / "c-pressure"),
        },
        {
            "kind": "spectrum",
            "system": {"preset": "full-2"},
            "parameters": {
                "observable": {"indicator": "1"},
                "a_grid": [0.25, 0.5, 0.75],
                "oracle": True,
            },
            "output_dir": str(tmp_path / "c-spectrum"),
        },
        {
            "kind": "flow-spectrum",
            "system": {"preset": "full-2"},
            "parameters": {
                "roof": {"values": {"0": 1.0, "1": 2.0}},
                "observable": {"indicator": "1"},
                "a_grid": [0.2, 0.3333333333333333, 0.45],
            },
            "output_dir": str(tmp_path / "c-flow"),
        },
        {
            "kind": "lorenz",
            "parameters": {"round_trips": 500, "depth": 10},
            "seed": 1,
            "output_dir": str(tmp_path / "c-lorenz"),
        },
        {
            "kind": "ldp-level1",
            "system": {"preset": "full-2"},
            "parameters": {
                "measure": {"type": "bernoulli", "p": [0.5, 0.5]},
                "observable": {"indicator": "1"},
                "s_grid": [0.5, 0.75],
                "dp": {"n": 20, "threshold": 0.7},
                "mc": {"n": 16, "threshold": 0.7, "trials": 5000},
            },
            "seed": 99,
            "output_dir": str(tmp_path / "c-ldp1"),
        },
        {
            "kind": "ldp-level2",
            "system": {"preset": "full-2"},
            "parameters": {
                "measure": {"type": "bernoulli", "p": [0.5, 0.5]},
                "potential": {"constant": 0.0},
                "ball": [{"word": "1", "center": 0.75, "delta": 0.02}],
                "n": 24,
                "trials": 4000,
            },
            "seed": 4242,
            "output_dir": str(tmp_path / "c-ldp2"),
        },
        {
            "kind": "gibbs-audit",
            "system": {"preset": "full-2"},
            "parameters": {
                "measure": {"type": "bernoulli", "p": [0.5, 0.5]},
                "potential": {"constant": 0.0},
                "n_max": 10,
                "delta_grid": [0.01, 0.05],
                "expect_gibbs": True,
            },
            "output_dir": str(tmp_path / "c-gibbs"),
        },
        {
            "kind": "approx",
            "system": {"preset": "full-2"},
            "parameters": {"nested": {"n_max": 6}},
            "output_dir": str(tmp_path / "c-approx"),
        },
    ]
    for cfg in configs:
        fresh = run(cfg, use_cache=False)
        cached = run(cfg, use_cache=True)
        again = run(cfg, use_cache=False)
        assert cached["cache_hit"]
        assert fresh["payload_hash"] == cached["payload_hash"] == again["payload_hash"]
        report_path = tmp_path / cfg["output_dir"].split("/")[-1] / "report.json"
        on_disk = json.loads(report_path.read_text())
        assert on_disk["payload_hash"] == fresh["payload_hash"]
    print(f"PASS criterion-12 determinism ({len(configs)} experiment kinds)")
