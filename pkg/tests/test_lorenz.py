import math

import numpy as np
import pytest

from shiftlab.errors import (
    HitSingularLine,
    NotBranchConstant,
    ParamOutOfRange,
    UnderflowDepth,
)
from shiftlab.lorenz import (
    acim_proxy,
    branch_intervals,
    cylinder_midpoints,
    fiber_contraction_audit,
    flow_average,
    inverse_branch,
    itinerary,
    poincare_step,
    quotient_orbit,
    quotient_orbit_matrix,
    quotient_spectrum_transfer,
    reference_model,
    validate_model,
)
from shiftlab.measures import stream_rng
from shiftlab.suspension import flow_integral, separated_set_entropy


@pytest.fixture(scope="module")
def model():
    return reference_model()


def test_reference_params_valid(model):
    assert model.alpha == 0.75
    assert 2 * model.alpha > math.sqrt(2)


def test_rejected_parameters():
    with pytest.raises(ParamOutOfRange, match="sqrt"):
        validate_model(0.5, 0.25, 0.5, -3, -1, 2)
    with pytest.raises(ParamOutOfRange, match="gamma"):
        validate_model(0.75, 0.5, 0.5, -3, -1, 2)
    with pytest.raises(ParamOutOfRange, match="lam1 \\+ lam3"):
        validate_model(0.75, 0.25, 0.5, -1.5, -1, 2)
    with pytest.raises(ParamOutOfRange, match="lam2 \\+ lam3"):
        validate_model(0.75, 0.25, 0.5, -3, -2.5, 2)


def test_fixed_point_invariant(model):
    fp = (1.0, -model.gamma / (1.0 - model.beta))
    assert fp[1] == pytest.approx(-2.0 / 3.0)
    image = poincare_step(model, fp)
    assert abs(image[0] - fp[0]) <= 1e-12
    assert abs(image[1] - fp[1]) <= 1e-12


def test_sign_clause(model):
    rng = stream_rng(5, 0)
    xs = rng.uniform(-1.0, -1e-6, 200)
    ys = rng.uniform(-1.0, 1.0, 200)
    for x, y in zip(xs, ys):
        _, y1 = poincare_step(model, (float(x), float(y)))
        assert y1 > 0.0
    for x, y in zip(-xs, ys):
        _, y1 = poincare_step(model, (float(x), float(y)))
        assert y1 < 0.0


def test_period_two_orbit(model):
    # x > 0 with f(x) = -x solves 2 x^(3/4) + x = 1
    lo, hi = 0.0, 1.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if 2.0 * mid**0.75 + mid < 1.0:
            lo = mid
        else:
            hi = mid
    xhat = 0.5 * (lo + hi)
    assert abs(model.f_scalar(xhat) + xhat) < 1e-12
    assert abs(model.f_scalar(-xhat) - xhat) < 1e-12
    assert list(itinerary(model, xhat, 6)) == [1, 0, 1, 0, 1, 0]


def test_singular_line_detection(model):
    with pytest.raises(HitSingularLine):
        poincare_step(model, (0.0, 0.3))
    x_preimage = 0.5 ** (1.0 / model.alpha)  # f maps it to 0 exactly
    assert model.f_scalar(x_preimage) == 0.0
    with pytest.raises(HitSingularLine):
        poincare_step(model, (x_preimage, 0.0))


def test_orbit_perturbs_and_counts(model):
    x_preimage = 0.5 ** (1.0 / model.alpha)
    xs, perturbed = quotient_orbit(model, x_preimage, 10)
    assert perturbed == 1
    assert np.isfinite(xs).all()


def test_itinerary_fixed_point_and_roundtrip(model):
    assert (itinerary(model, 1.0, 12) == 1).all()
    assert (itinerary(model, -1.0, 12) == 0).all()


def test_inverse_branch_examples(model):
    lo, hi = inverse_branch(model, "R")
    assert (lo, hi) == (0.0, 1.0)
    lo2, hi2 = inverse_branch(model, "RR")
    assert lo2 == pytest.approx(0.5 ** (1.0 / model.alpha), abs=1e-15)
    assert hi2 == 1.0
    with pytest.raises(UnderflowDepth):
        inverse_branch(model, "RL" * 60)


def test_branch_intervals_cover_and_contract(model):
    bits, lo, hi = branch_intervals(model, 12)
    assert len(lo) == 4096
    assert (hi > lo).all()  # every word is realized
    lengths = hi - lo
    # contraction certificate: one branch image and 11 derivative factors
    assert lengths.max() <= 2.0 * (2 * model.alpha) ** -11
    # intervals of distinct words are disjoint up to endpoints
    order = np.argsort(lo)
    assert (lo[order][1:] >= hi[order][:-1] - 1e-12).all()


def test_roundtrip_itinerary_inverse_branch(model):
    rng = stream_rng(99, 0)
    xs = rng.uniform(-1.0, 1.0, 10_000)
    depth = 12
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


def test_expansion_along_common_cylinder(model):
    bits, lo, hi = branch_intervals(model, 10)
    rng = stream_rng(3, 0)
    idx = rng.integers(0, len(lo), 200)
    for i in idx:
        a = lo[i] + 0.3 * (hi[i] - lo[i])
        b = lo[i] + 0.7 * (hi[i] - lo[i])
        fa = quotient_orbit_matrix(model, np.array([a, b]), 10)
        gap = abs(fa[0, 9] - fa[1, 9])
        assert gap >= (2 * model.alpha) ** 9 * abs(a - b) * (1 - 1e-9)


def test_fiber_contraction_exact(model):
    ratios = fiber_contraction_audit(model, 0.37, -0.5, 0.5, 10)
    assert np.allclose(ratios, model.beta ** np.arange(11), rtol=0, atol=1e-15)
    assert (np.diff(ratios) <= 0).all()
    with pytest.raises(ValueError):
        fiber_contraction_audit(model, 0.37, 0.5, 0.5, 5)


def test_roof_positive_and_capped(model):
    xs = np.linspace(-1, 1, 10_001)
    xs = xs[xs != 0]
    roof = model.roof(xs)
    assert (roof >= model.roof_base).all()
    assert (roof <= model.roof_cap).all()
    r = model.uncapped_roof_radius()
    far = np.abs(xs) > r * 1.0001
    raw = model.roof_base - np.log(np.abs(xs[far])) / model.lam3
    assert np.allclose(model.roof(xs[far]), raw)


def test_flow_average_fixed_point_and_constant(model):
    fp = (1.0, -2.0 / 3.0)
    res = flow_average(model, fp, 500, lambda x, y: x - y)
    assert res.value == pytest.approx(1.0 + 2.0 / 3.0, abs=1e-12)
    res1 = flow_average(model, (0.377, 0.1), 5_000, lambda x, y: 1.0)
    assert res1.value == pytest.approx(1.0)


def test_flow_average_matches_symbolic_proxy(model):
    # map-side roof-weighted average of 1_{x>0} against the suspension-side
    # ratio formula under the empirical-cylinder proxy measure
    from shiftlab.functions import LocallyConstantFunction

    res = flow_average(
        model, (0.3777, 0.1), 100_000, lambda x, y: 1.0 if x > 0 else 0.0
    )
    measure, roof_lc = acim_proxy(model, order=2, n_samples=200_000, seed=6021)
    # induced section function of 1_{x>0}: the roof where the cylinder sits
    # in the right branch, 0 elsewhere
    vals = np.array(
        [v if w[0] == 1 else 0.0 for w, v in zip(roof_lc.words, roof_lc.values)]
    )
    phi = LocallyConstantFunction(
        roof_lc.sft, roof_lc.order, roof_lc.words, vals, "observable"
    )
    prediction = flow_integral(measure, roof_lc, phi)
    assert abs(res.value - prediction) < 0.01


def test_quotient_spectrum_transfer(model):
    curve = quotient_spectrum_transfer(
        model, lambda x, y: 1.0 if x > 0 else 0.0, [0.25, 0.5, 1.0]
    )
    H = lambda a: -a * math.log(a) - (1 - a) * math.log(1 - a)
    assert curve.values[0] == pytest.approx(H(0.25), abs=1e-9)
    assert curve.values[1] == pytest.approx(math.log(2), abs=1e-10)
    assert curve.values[2] == pytest.approx(0.0, abs=1e-12)
    assert curve.metadata["route"] == "via symbolic conjugacy"
    with pytest.raises(NotBranchConstant):
        quotient_spectrum_transfer(model, lambda x, y: x, [0.5])


def test_separated_set_entropy_on_quotient(model):
    mids = cylinder_midpoints(model, 16)
    res = separated_set_entropy(
        lambda xs, t: quotient_orbit_matrix(model, xs, t), 16, 1e-3, mids
    )
    assert abs(res.entropy - math.log(2)) < 0.05
