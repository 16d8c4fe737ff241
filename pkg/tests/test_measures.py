import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shiftlab.errors import AlphabetMismatch, NotErgodic, SupportMismatch
from shiftlab.functions import indicator
from shiftlab.measures import (
    bernoulli_measure,
    cylinder_marginals,
    dstar_distance,
    dstar_truncation_bound,
    integrate,
    lift_measure,
    markov_entropy,
    markov_measure,
    marginals_from_tables,
    measure_dstar,
    parry_measure,
    sample_orbit,
    sample_paths,
    word_probability,
)
from shiftlab.sft import full_shift, golden_mean_shift, topological_entropy, validate_sft

PHI = (1.0 + math.sqrt(5.0)) / 2.0


def test_parry_full_shift_is_uniform(full2):
    m = parry_measure(full2)
    assert np.allclose(m.transition, 0.5)
    assert np.allclose(m.stationary, 0.5)


def test_parry_golden_mean_closed_form(golden):
    m = parry_measure(golden)
    # Perron eigenvectors of [[1,1],[1,0]]
    assert m.transition[0, 0] == pytest.approx(1 / PHI, abs=1e-12)
    assert m.transition[0, 1] == pytest.approx(1 / PHI**2, abs=1e-12)
    assert m.transition[1, 0] == pytest.approx(1.0, abs=1e-12)
    assert m.stationary[0] == pytest.approx(PHI**2 / (1 + PHI**2), abs=1e-12)


def test_parry_two_cycle_deterministic():
    cyc = validate_sft([[0, 1], [1, 0]])
    m = parry_measure(cyc)
    assert markov_entropy(m) == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(m.transition, [[0, 1], [1, 0]])


@pytest.mark.parametrize(
    "sft_builder", [lambda: full_shift(2), lambda: full_shift(3), golden_mean_shift]
)
def test_parry_entropy_equals_topological(sft_builder):
    sft = sft_builder()
    assert abs(markov_entropy(parry_measure(sft)) - topological_entropy(sft)) < 1e-10


def test_bernoulli_entropies(full2):
    assert markov_entropy(bernoulli_measure(full2, [0.5, 0.5])) == pytest.approx(
        math.log(2), abs=1e-14
    )
    assert markov_entropy(bernoulli_measure(full2, [1.0, 0.0])) == 0.0


def test_bernoulli_support_violation(golden):
    with pytest.raises(SupportMismatch):
        bernoulli_measure(golden, [0.5, 0.5])


def test_integrate_examples(full2, golden, ind1):
    assert integrate(bernoulli_measure(full2, [0.5, 0.5]), ind1) == pytest.approx(0.5)
    assert integrate(bernoulli_measure(full2, [0.3, 0.7]), ind1) == pytest.approx(0.7)
    g = indicator(golden, (1,))
    assert integrate(parry_measure(golden), g) == pytest.approx(
        1 / (1 + PHI**2), abs=1e-12
    )


def test_cylinder_marginals_examples(full2, golden):
    b = bernoulli_measure(full2, [0.5, 0.5])
    marg = cylinder_marginals(b, 2)
    assert all(p == pytest.approx(0.25) for p in marg.table(2).values())
    pm = cylinder_marginals(parry_measure(golden), 2)
    assert pm.table(2).get((1, 1), 0.0) == 0.0
    cyc = parry_measure(validate_sft([[0, 1], [1, 0]]))
    t3 = cylinder_marginals(cyc, 3).table(3)
    assert sorted(t3.items()) == [((0, 1, 0), pytest.approx(0.5)), ((1, 0, 1), pytest.approx(0.5))]


def test_marginal_consistency(full2, golden):
    for m in (bernoulli_measure(full2, [0.3, 0.7]), parry_measure(golden)):
        marg = cylinder_marginals(m, 5)
        assert marg.consistency_error() < 1e-10
        assert marg.shift_invariance_error() < 1e-10
        for k in range(1, 6):
            assert sum(marg.table(k).values()) == pytest.approx(1.0, abs=1e-12)


def test_word_probability_matches_tables(golden):
    m = parry_measure(golden)
    t3 = cylinder_marginals(m, 3).table(3)
    for w, p in t3.items():
        assert word_probability(m, w) == pytest.approx(p, abs=1e-14)
    assert word_probability(m, (1, 1)) == 0.0


def test_dstar_identity_and_diracs(full2):
    b = cylinder_marginals(bernoulli_measure(full2, [0.5, 0.5]), 8)
    assert dstar_distance(b, b) == 0.0
    d0 = cylinder_marginals(bernoulli_measure(full2, [1.0, 0.0]), 12)
    d1 = cylinder_marginals(bernoulli_measure(full2, [0.0, 1.0]), 12)
    # per-level term 2^(1-2k), geometric series -> 2/3
    assert dstar_distance(d0, d1) == pytest.approx(2.0 / 3.0, abs=1e-6)


def test_dstar_alphabet_mismatch(full2):
    a = cylinder_marginals(bernoulli_measure(full2, [0.5, 0.5]), 2)
    b = cylinder_marginals(parry_measure(full_shift(3)), 2)
    with pytest.raises(AlphabetMismatch):
        dstar_distance(a, b)


def test_dstar_truncation_bounds():
    assert dstar_truncation_bound(5, 2) == 2.0 ** (1 - 5)
    sharp = dstar_truncation_bound(2, 2, sharp=True)
    assert sharp == pytest.approx(2.0 * 4.0**-2 / 3.0)
    assert sharp < dstar_truncation_bound(2, 2)


@st.composite
def random_marginal_pair(draw):
    """Two depth-2 marginal systems over the full 2-shift."""
    tables = []
    for _ in range(2):
        probs = [draw(st.floats(0.05, 1.0)) for _ in range(4)]
        total = sum(probs)
        pairs = {
            (i, j): probs[2 * i + j] / total for i in range(2) for j in range(2)
        }
        ones = {(i,): sum(p for w, p in pairs.items() if w[0] == i) for i in range(2)}
        tables.append(marginals_from_tables(2, [ones, pairs]))
    return tables


@given(random_marginal_pair(), random_marginal_pair())
@settings(max_examples=50, deadline=None)
def test_dstar_is_a_metric(pair_a, pair_b):
    a, b = pair_a
    c, _ = pair_b
    dab = dstar_distance(a, b)
    dba = dstar_distance(b, a)
    assert dab >= 0.0
    assert dab == pytest.approx(dba, abs=1e-15)
    # triangle inequality
    assert dstar_distance(a, c) <= dab + dstar_distance(b, c) + 1e-12


def test_sample_orbit_requires_ergodic(full2):
    m = markov_measure(
        full2, [[1.0, 0.0], [0.0, 1.0]], stationary=[0.5, 0.5]
    )
    assert not m.ergodic
    with pytest.raises(NotErgodic):
        sample_orbit(m, 10, seed=1)


def test_sample_orbit_deterministic_cases(full2, golden):
    const = sample_orbit(bernoulli_measure(full2, [1.0, 0.0]), 50, seed=3)
    assert (const == 0).all()
    orbit = sample_orbit(parry_measure(golden), 100_000, seed=11)
    pairs = np.lib.stride_tricks.sliding_window_view(orbit, 2)
    assert not ((pairs[:, 0] == 1) & (pairs[:, 1] == 1)).any()


def test_sample_orbit_frequency_clt_gate(full2):
    orbit = sample_orbit(bernoulli_measure(full2, [0.5, 0.5]), 10**6, seed=7)
    assert abs(orbit.mean() - 0.5) < 0.002  # 3 sigma at n = 1e6 is 0.0015


def test_sample_paths_reproducible_across_chunking(full2):
    m = bernoulli_measure(full2, [0.5, 0.5])
    a = sample_paths(m, 12, 1000, seed=5, chunk=64)
    b = sample_paths(m, 12, 1000, seed=5, chunk=64)
    assert np.array_equal(a, b)


def test_empirical_pair_frequencies_converge(golden):
    m = parry_measure(golden)
    n = 250_000
    orbit = sample_orbit(m, n, seed=23)
    pairs = np.lib.stride_tricks.sliding_window_view(orbit, 2)
    exact = cylinder_marginals(m, 2).table(2)
    for w, p in exact.items():
        emp = ((pairs[:, 0] == w[0]) & (pairs[:, 1] == w[1])).mean()
        sigma = math.sqrt(p * (1 - p) / n)
        assert abs(emp - p) < 3 * max(sigma, 1e-4) * 3  # correlated samples slack


def test_lift_measure_preserves_entropy_and_marginals(golden):
    m = parry_measure(golden)
    lifted = lift_measure(m, 3)
    assert lifted.order == 3
    assert abs(markov_entropy(lifted) - markov_entropy(m)) < 1e-12
    assert measure_dstar(m, lifted, depth=6) < 1e-12


def test_integrate_order_mismatch(full2, golden):
    from shiftlab.errors import OrderMismatch

    g_on_golden = indicator(golden, (1,))
    with pytest.raises(OrderMismatch):
        integrate(bernoulli_measure(full2, [0.5, 0.5]), g_on_golden)


def test_dstar_translation_invariance(full2):
    # mixing both arguments with a common third measure scales the distance
    # by the mixing weight exactly: every level term is an L1 difference of
    # linear functionals
    from shiftlab.measures import mixture_marginals

    a = cylinder_marginals(bernoulli_measure(full2, [0.3, 0.7]), 4)
    b = cylinder_marginals(bernoulli_measure(full2, [0.6, 0.4]), 4)
    w = cylinder_marginals(parry_measure(full2), 4)
    for alpha in (0.25, 0.5, 0.9):
        mixed_a = mixture_marginals([a, w], [alpha, 1 - alpha])
        mixed_b = mixture_marginals([b, w], [alpha, 1 - alpha])
        assert dstar_distance(mixed_a, mixed_b) == pytest.approx(
            alpha * dstar_distance(a, b), abs=1e-14
        )
