"""Stationary profiles of the mean-field equation and the particle invariant law.

The stationary CDF solves ``phi' = -(2/sigma^2) A(phi)``; its density is
``f = -(2/sigma^2) A(F)``. For the particle system the reordered invariant
law has independent exponential gaps, which gives an exact sampler.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P
from scipy import integrate, interpolate, special

from .flux import FluxFunction, FluxKind, check_hypothesis_h
from .pde import GridProfile
from .rng import Purpose, make_generator

TAIL = 1e-10


class ClosedForm(enum.Enum):
    BURGERS_LOGISTIC = "burgers_logistic"
    CUBIC = "cubic"


def burgers_cdf(x, sigma: float):
    return special.expit(np.asarray(x, dtype=float) / sigma**2)


def burgers_density(x, sigma: float):
    return 1.0 / (4 * sigma**2 * np.cosh(np.asarray(x, dtype=float) / (2 * sigma**2)) ** 2)


def cubic_cdf(x, sigma: float):
    return 1.0 / np.sqrt(1.0 + np.exp(-4.0 * np.asarray(x, dtype=float) / sigma**2))


def cubic_density(x, sigma: float):
    return -(2.0 / sigma**2) * (cubic_cdf(x, sigma) ** 3 - cubic_cdf(x, sigma))


@dataclass
class StationaryProfile:
    cdf: GridProfile
    density: np.ndarray
    x_bar: float
    sigma: float
    closed_form: ClosedForm | None = None
    spectral_gap_guarantee: bool = True
    truncated: bool = False

    @property
    def x(self) -> np.ndarray:
        return self.cdf.x

    def mass(self) -> float:
        return float(integrate.trapezoid(self.density, dx=self.cdf.h))

    def mean(self) -> float:
        return float(integrate.trapezoid(self.x * self.density, dx=self.cdf.h))


def _march(coeffs, scale: float, v0: float, step: float, direction: int, max_steps: int):
    # classical RK4 on u' = scale * P(u); scalar floats keep this fast
    c = tuple(float(v) for v in coeffs[::-1])

    def rhs(u):
        val = 0.0
        for ci in c:
            val = val * u + ci
        return scale * val

    hs = direction * step
    out = [v0]
    u = v0
    for _ in range(max_steps):
        if u < TAIL or u > 1.0 - TAIL:
            return np.array(out), False
        k1 = rhs(u)
        k2 = rhs(u + 0.5 * hs * k1)
        k3 = rhs(u + 0.5 * hs * k2)
        k4 = rhs(u + hs * k3)
        u = u + hs / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out.append(u)
    return np.array(out), True


def _reflected(coeffs) -> np.ndarray:
    """Coefficients of ``B(v) = A(1 - v)``."""
    return P.Polynomial(coeffs)(P.Polynomial([1.0, -1.0])).coef


def _closed_form_of(flux: FluxFunction) -> ClosedForm | None:
    if flux.kind is FluxKind.BURGERS:
        return ClosedForm.BURGERS_LOGISTIC
    if flux.kind is FluxKind.CUBIC:
        return ClosedForm.CUBIC
    return None


def solve_stationary_ode(flux: FluxFunction, sigma: float, x_bar: float | None = 0.0, grid=None, *,
                         value_at_zero: float = 0.5, step: float | None = None,
                         max_extent: float | None = None) -> StationaryProfile:
    """RK4 solution from ``phi(0) = value_at_zero``, translated to mean ``x_bar``.

    ``grid`` is ``None`` (the integration grid itself, spacing ``1e-3 sigma^2``)
    or ``(x_min, x_max, h)``; off-grid values come from the cubic Hermite
    interpolant using the exact slope, so the local error stays O(step^4).
    With ``x_bar=None`` no translation is applied. Integration stops once
    the tails pass 1e-10, or at ``max_extent`` (default ``1e3 sigma^2``)
    when ``A'`` vanishes at an endpoint and the tail is only algebraic.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if not 0.0 < value_at_zero < 1.0:
        raise ValueError("value_at_zero must lie in (0, 1)")
    report = check_hypothesis_h(flux)
    for clause in ("A(1)=0", "A<0 on (0,1)"):
        if not report.clauses[clause]:
            raise ValueError(f"no stationary probability solution: clause {clause!r} fails")
    gap = report.clauses["A'(0)<0"] and report.clauses["A'(1)>0"]
    step = 1e-3 * sigma**2 if step is None else float(step)
    extent = 1e3 * sigma**2 if max_extent is None else float(max_extent)
    max_steps = int(math.ceil(extent / step))
    k = -2.0 / sigma**2
    # the right half is carried as 1 - phi so the density keeps its relative precision in the tail
    b_coeffs = _reflected(flux.coeffs)
    right, cut_r = _march(b_coeffs, -k, 1.0 - value_at_zero, step, +1, max_steps)
    left, cut_l = _march(flux.coeffs, k, value_at_zero, step, -1, max_steps)
    k0 = len(left) - 1
    n_raw = k0 + len(right)
    x_raw = step * (np.arange(n_raw) - k0)
    x_left, x_right = x_raw[: k0 + 1], x_raw[k0:]
    phi_left = left[::-1]
    d_left = k * flux.a(phi_left)
    d_right = k * P.polyval(right, b_coeffs)
    phi = np.concatenate([phi_left, 1.0 - right[1:]])
    dens_raw = np.concatenate([d_left, d_right[1:]])
    shift = 0.0
    if x_bar is not None:
        m0 = float(integrate.trapezoid(x_raw * dens_raw, dx=step))
        # the mean is affine in the shift, so one update is exact
        shift = float(x_bar) - m0
    if grid is None:
        profile = GridProfile(x_raw[0] + shift, step, phi)
        density = dens_raw
    else:
        x_min, x_max, h = grid
        n = int(round((x_max - x_min) / h)) + 1
        y = x_min + h * np.arange(n) - shift
        lo_part = interpolate.CubicHermiteSpline(x_left, phi_left, d_left, extrapolate=False)
        hi_part = interpolate.CubicHermiteSpline(x_right, right, -d_right, extrapolate=False)
        on_left = y <= 0.0
        lo_val = np.where(y < x_raw[0], 0.0, np.nan_to_num(lo_part(np.where(on_left, y, 0.0))))
        hi_val = np.where(y > x_raw[-1], 0.0, np.nan_to_num(hi_part(np.where(on_left, 0.0, y))))
        lo_val = np.clip(lo_val, 0.0, 1.0)
        hi_val = np.clip(hi_val, 0.0, 1.0)
        values = np.where(on_left, lo_val, 1.0 - hi_val)
        density = np.where(on_left, k * flux.a(lo_val), k * P.polyval(hi_val, b_coeffs))
        profile = GridProfile(x_min, h, values)
    anchor = shift if x_bar is None else float(x_bar)
    return StationaryProfile(profile, np.asarray(density, dtype=float), anchor, sigma, _closed_form_of(flux),
                             gap, cut_l or cut_r)


def closed_form_profile(kind: ClosedForm, sigma: float, x):
    """(cdf, density) of the closed forms, anchored at ``phi(0) = 1/2`` resp. ``1/sqrt 2``."""
    if kind is ClosedForm.BURGERS_LOGISTIC:
        return burgers_cdf(x, sigma), burgers_density(x, sigma)
    return cubic_cdf(x, sigma), cubic_density(x, sigma)


def invariant_beta(flux: FluxFunction, n: int) -> np.ndarray:
    """``beta_n(i) = -n A((i-1)/n)`` for ``i = 2..n``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return -n * np.asarray(flux.a(np.arange(1, n) / n), dtype=float)


def gaps_to_positions(z, x_bar: float = 0.0) -> np.ndarray:
    """Apply the change of variables ``x = N z + x_bar`` as a centred prefix sum."""
    z = np.asarray(z, dtype=float)
    x = np.concatenate([np.zeros(z.shape[:-1] + (1,)), np.cumsum(z, axis=-1)], axis=-1)
    return x - x.mean(axis=-1, keepdims=True) + x_bar


def dense_map_matrix(n: int) -> np.ndarray:
    """The ``n x (n-1)`` matrix ``N``: first row ``(j-n)/n``, then the rows of ``M^{-1}``."""
    if not 2 <= n <= 2000:
        raise ValueError("dense construction is limited to 2 <= n <= 2000")
    j = np.arange(1, n)
    k = np.arange(1, n)[:, None]
    minv = (j - n * (j > k)) / n
    return np.vstack([((j - n) / n)[None, :], minv])


@dataclass
class InvariantSampler:
    n: int
    beta: np.ndarray
    x_bar: float = 0.0

    def __post_init__(self) -> None:
        self.beta = np.asarray(self.beta, dtype=float)
        if self.n < 2 or self.beta.shape != (self.n - 1,):
            raise ValueError("need n >= 2 and n-1 beta values")
        if np.any(self.beta <= 0):
            i = 2 + int(np.argmax(self.beta <= 0))
            raise ValueError(f"beta_n({i}) <= 0: flux not admissible for the invariant law")

    @classmethod
    def from_flux(cls, flux: FluxFunction, n: int, x_bar: float = 0.0) -> "InvariantSampler":
        return cls(n, invariant_beta(flux, n), x_bar)

    @property
    def map_matrix(self) -> np.ndarray:
        return dense_map_matrix(self.n)

    def rates(self, sigma: float) -> np.ndarray:
        return 2.0 * self.beta / sigma**2

    def gaps(self, sigma: float, seed: int, count: int = 1, start: int = 0) -> np.ndarray:
        """Exponential gaps, one stream per sample index ``start..start+count-1``."""
        scale = 1.0 / self.rates(sigma)
        out = np.empty((count, self.n - 1))
        for k in range(count):
            out[k] = make_generator(seed, Purpose.SAMPLER, start + k, 0).standard_exponential(self.n - 1)
        return out * scale


def sample_invariant_reordered(sampler: InvariantSampler, sigma: float, seed: int, count: int | None = None,
                               start: int = 0) -> np.ndarray:
    """Nondecreasing draws from the reordered invariant law, on ``sum x = n x_bar``.

    Returns shape ``(n,)`` when ``count`` is None, else ``(count, n)``.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    z = sampler.gaps(sigma, seed, 1 if count is None else count, start)
    x = gaps_to_positions(z, sampler.x_bar)
    return x[0] if count is None else x
