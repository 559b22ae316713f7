import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cdfchaos.flux import drift_coefficients, make_builtin_flux
from cdfchaos.sde import (CoupledEnsembles, ParticleEnsemble, SimulationError, check_rearrangement,
                          project_to_mean_hyperplane, ranks, step, step_coupled)
from cdfchaos.rng import NoiseSource


@pytest.mark.parametrize("x,expected", [((3.0, 1.0, 2.0), (3, 1, 2)), ((5.0,), (1,)), ((1.0, 1.0), (1, 2))])
def test_ranks_examples(x, expected):
    assert tuple(ranks(x)) == expected


@settings(max_examples=80, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=1, max_size=20))
def test_ranks_are_permutation(vals):
    r = ranks(np.array(vals, dtype=float))
    assert sorted(r) == list(range(1, len(vals) + 1))
    for i in range(len(vals)):
        for j in range(len(vals)):
            if vals[i] < vals[j] or (vals[i] == vals[j] and i < j):
                assert r[i] < r[j]


def test_zero_noise_step(burgers):
    ens = ParticleEnsemble([0.0, 1.0], 1.0, drift_coefficients(burgers, 2))
    out = step(ens, 0.1)
    np.testing.assert_allclose(out.positions[0], [0.025, 0.975], atol=1e-15)
    assert out.step_count == 1 and out.time == pytest.approx(0.1)


def test_step_validation(burgers):
    a = drift_coefficients(burgers, 2)
    with pytest.raises(ValueError):
        ParticleEnsemble([0.0, 1.0], 0.0, a)
    with pytest.raises(ValueError):
        ParticleEnsemble([0.0, np.nan], 1.0, a)
    with pytest.raises(ValueError):
        ParticleEnsemble([0.0, 1.0, 2.0], 1.0, a)
    with pytest.raises(ValueError):
        ParticleEnsemble([0.0, 1.0], 1.0, a).step(0.0)


def test_non_finite_reports_particle(burgers):
    ens = ParticleEnsemble([0.0, 1.0], 1.0, np.array([0.0, np.inf]))
    with pytest.raises(SimulationError, match="particle 1.*step 1"):
        ens.step(0.1)


@pytest.mark.parametrize("x,x_bar,expected", [((0, 2), 0, (-1, 1)), ((1, 1, 1), 5, (5, 5, 5)), ((0, 1, 5), 2, (0, 1, 5))])
def test_projection_examples(x, x_bar, expected):
    np.testing.assert_allclose(project_to_mean_hyperplane(np.array(x, float), x_bar), expected, atol=1e-15)


def test_projection_sum(rng):
    x = rng.standard_normal((4, 50)) * 100
    y = project_to_mean_hyperplane(x, 3.5)
    np.testing.assert_allclose(y.sum(axis=1), 50 * 3.5, rtol=1e-13)


def test_mean_drift_is_exactly_a1_without_noise():
    from cdfchaos.flux import polynomial_flux
    flux = polynomial_flux([0.0, 0.0, 1.0])
    ens = ParticleEnsemble(np.linspace(0, 1, 7), 1.0, drift_coefficients(flux, 7))
    m0 = ens.mean()[0]
    for _ in range(10):
        ens.step(0.01)
    assert ens.mean()[0] - m0 == pytest.approx(-0.1, abs=1e-13)


def test_seeded_reproducible(burgers):
    a = drift_coefficients(burgers, 10)
    x0 = np.linspace(-1, 1, 10)
    e1 = ParticleEnsemble.seeded(x0, 1.0, a, seed=3)
    e2 = ParticleEnsemble.seeded(x0, 1.0, a, seed=3)
    for _ in range(20):
        e1.step(0.01)
        e2.step(0.01)
    np.testing.assert_array_equal(e1.positions, e2.positions)


def test_coupled_identical_stays_identical(cubic):
    a = drift_coefficients(cubic, 16)
    x0 = np.random.default_rng(0).standard_normal((3, 16))
    noise = NoiseSource(1, 16, range(3))
    pair = CoupledEnsembles(ParticleEnsemble(x0, 1.0, a, noise), ParticleEnsemble(x0.copy(), 1.0, a, noise))
    for _ in range(200):
        step_coupled(pair, 0.01)
    np.testing.assert_array_equal(pair.primary.positions, pair.twin.positions)


def test_coupled_validation(burgers, cubic):
    x0 = np.zeros((1, 4))
    p = ParticleEnsemble(x0, 1.0, drift_coefficients(burgers, 4))
    with pytest.raises(ValueError):
        CoupledEnsembles(p, ParticleEnsemble(x0, 1.0, drift_coefficients(cubic, 4)))
    with pytest.raises(ValueError):
        CoupledEnsembles(p, p, shared_noise=False)


def test_rearrangement_examples():
    assert check_rearrangement([1, 2], [3, 4], [1, 0])
    assert check_rearrangement([1, 2, 3], [0, 5, 9], [0, 1, 2])
    assert check_rearrangement([2, 2, 2], [0, 1, 7], [2, 0, 1])
    with pytest.raises(ValueError):
        check_rearrangement([2, 1], [0, 1], [0, 1])
    with pytest.raises(ValueError):
        check_rearrangement([1, 2], [0, 1], [0, 0])


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 12).flatmap(lambda n: st.tuples(
    st.lists(st.floats(-100, 100), min_size=n, max_size=n),
    st.lists(st.floats(-100, 100), min_size=n, max_size=n),
    st.permutations(range(n)))))
def test_rearrangement_property(data):
    a, b, tau = data
    assert check_rearrangement(sorted(a), sorted(b), list(tau))
