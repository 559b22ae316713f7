import math

import numpy as np
import pytest
from scipy import stats

from cdfchaos.flux import make_builtin_flux, polynomial_flux
from cdfchaos.stationary import (ClosedForm, InvariantSampler, burgers_cdf, closed_form_profile, cubic_cdf,
                                 dense_map_matrix, gaps_to_positions, invariant_beta,
                                 sample_invariant_reordered, solve_stationary_ode)


def test_burgers_density_at_zero(burgers):
    prof = solve_stationary_ode(burgers, 1.0, 0.0)
    k = int(np.argmin(np.abs(prof.x)))
    assert prof.x[k] == pytest.approx(0.0, abs=1e-12)
    assert prof.density[k] == pytest.approx(0.25, abs=1e-12)
    assert prof.closed_form is ClosedForm.BURGERS_LOGISTIC
    assert prof.mass() == pytest.approx(1.0, abs=1e-9)
    assert prof.mean() == pytest.approx(0.0, abs=1e-9)


def test_cubic_anchor(cubic):
    prof = solve_stationary_ode(cubic, 1.0, None, value_at_zero=1 / math.sqrt(2))
    k = int(np.argmin(np.abs(prof.x)))
    assert prof.x[k] == pytest.approx(0.0, abs=1e-12)
    assert prof.cdf.values[k] == pytest.approx(1 / math.sqrt(2), abs=1e-15)
    assert cubic_cdf(0.0, 1.0) == pytest.approx(1 / math.sqrt(2))


def test_burgers_sigma2_on_target_grid(burgers):
    prof = solve_stationary_ode(burgers, 2.0, 0.0, (-40.0, 40.0, 0.05))
    assert np.max(np.abs(prof.cdf.values - burgers_cdf(prof.x, 2.0))) <= 1e-8


def test_translation_family(cubic):
    c = 0.37
    a = solve_stationary_ode(cubic, 1.0, 0.2, (-10.0, 10.0, 0.01))
    b = solve_stationary_ode(cubic, 1.0, 0.2 + c, (-10.0 + c, 10.0 + c, 0.01))
    assert np.max(np.abs(a.cdf.values - b.cdf.values)) <= 1e-10


@pytest.mark.parametrize("kind,sigma", [("burgers", 1.0), ("burgers", 0.7), ("cubic", 1.0)])
def test_tail_slopes(kind, sigma):
    flux = make_builtin_flux(kind)
    prof = solve_stationary_ode(flux, sigma, 0.0)
    logf = np.log(np.maximum(prof.density, 1e-300))
    slope = np.gradient(logf, prof.cdf.h)
    # the cubic right tail is exhausted before 8 sigma^2 (rate 4), so probe it at 4 sigma^2
    reach = 8.0 if kind == "burgers" else 4.0
    for x0, target in ((reach * sigma**2, -2 * flux.a_prime(1.0) / sigma**2),
                       (-reach * sigma**2, -2 * flux.a_prime(0.0) / sigma**2)):
        k = int(np.argmin(np.abs(prof.x - x0)))
        assert slope[k] == pytest.approx(target, rel=0.05)


@pytest.mark.parametrize("kind,hi", [("burgers", 8.0), ("cubic", 5.0)])
def test_log_concave(kind, hi):
    prof = solve_stationary_ode(make_builtin_flux(kind), 1.0, 0.0, (-8.0, hi, 0.01))
    second = np.diff(np.log(prof.density), 2)
    assert np.max(second) <= 1e-8


def test_second_derivative_identity(cubic):
    h = 0.01
    prof = solve_stationary_ode(cubic, 1.0, 0.0, (-4.0, 4.0, h))
    f = prof.density
    f1 = (f[2:] - f[:-2]) / (2 * h)
    f2 = (f[2:] - 2 * f[1:-1] + f[:-2]) / h**2
    F = prof.cdf.values[1:-1]
    rhs = -2.0 * (6.0 * F) * f[1:-1] ** 2 + f1**2 / f[1:-1]
    assert np.max(np.abs(f2 - rhs)) <= 50 * h**2


def test_existence_errors():
    with pytest.raises(ValueError, match="A\\(1\\)=0"):
        solve_stationary_ode(polynomial_flux([0, 0, 1.0]), 1.0)
    with pytest.raises(ValueError, match="A<0"):
        solve_stationary_ode(polynomial_flux([0.0, 0.5, -1.5, 1.0]), 1.0)
    with pytest.raises(ValueError):
        solve_stationary_ode(make_builtin_flux("burgers"), 0.0)


def test_degenerate_endpoint_flagged():
    # A = x^2 (x - 1): A'(0) = 0, algebraic left tail
    flux = polynomial_flux([0.0, 0.0, -1.0, 1.0])
    prof = solve_stationary_ode(flux, 1.0, None, max_extent=50.0)
    assert not prof.spectral_gap_guarantee
    assert prof.truncated
    assert solve_stationary_ode(make_builtin_flux("burgers"), 1.0).spectral_gap_guarantee


def test_closed_form_profile_density_integrates():
    x = np.linspace(-30, 30, 60001)
    for kind in ClosedForm:
        cdf, dens = closed_form_profile(kind, 1.3, x)
        np.testing.assert_allclose(np.gradient(cdf, x[1] - x[0]), dens, atol=1e-6)


def test_beta_and_sampler_errors(burgers):
    np.testing.assert_allclose(invariant_beta(burgers, 3), [1 / 3, 1 / 3])
    with pytest.raises(ValueError):
        invariant_beta(burgers, 1)
    with pytest.raises(ValueError, match="beta_n\\(3\\)"):
        InvariantSampler(3, [1.0, 0.0])
    with pytest.raises(ValueError):
        InvariantSampler(3, [1.0])


def test_dense_map_agrees_with_prefix_sum(rng):
    for n in (2, 3, 17):
        z = rng.exponential(size=n - 1)
        np.testing.assert_allclose(dense_map_matrix(n) @ z, gaps_to_positions(z), atol=1e-13)
    with pytest.raises(ValueError):
        dense_map_matrix(2001)


def test_sampler_hyperplane_and_order(burgers):
    s = InvariantSampler.from_flux(burgers, 25, x_bar=1.5)
    x = sample_invariant_reordered(s, 0.8, seed=4, count=200)
    np.testing.assert_allclose(x.sum(axis=1), 25 * 1.5, rtol=1e-12)
    assert np.all(np.diff(x, axis=1) >= 0)
    single = sample_invariant_reordered(s, 0.8, seed=4)
    np.testing.assert_array_equal(single, x[0])
    np.testing.assert_array_equal(sample_invariant_reordered(s, 0.8, 4, count=5, start=3), x[3:8])


def test_sampler_n3_mean_gap(burgers):
    s = InvariantSampler.from_flux(burgers, 3)
    z = s.gaps(1.0, seed=11, count=100_000)
    se = 1.5 / math.sqrt(z.shape[0])
    assert abs(z[:, 1].mean() - 1.5) <= 4 * se


def test_sampler_n2_gap_law(burgers):
    s = InvariantSampler.from_flux(burgers, 2)
    x = sample_invariant_reordered(s, 1.0, seed=2, count=10_000)
    gap = x[:, 1] - x[:, 0]
    assert stats.kstest(gap, stats.expon(scale=2.0).cdf).statistic <= 0.03
