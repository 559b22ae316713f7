"""Mean-field CDF: explicit solver, Cole-Hopf representation, nonlinear paths.

The CDF ``F_t`` of the mean-field law solves the viscous conservation law
``dF/dt = (sigma^2/2) F_xx + d/dx A(F)`` with ``F(-inf) = 0`` and ``F(inf) = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from . import kernels
from .flux import FluxFunction
from .laws import GridLaw, Law
from .sde import SimulationError, ZeroNoise

BOUNDARY_TOL = 1e-6
MONOTONE_TOL = 1e-10


class ProfileError(ValueError):
    pass


class StabilityError(ValueError):
    def __init__(self, dt: float, dt_max: float):
        super().__init__(f"dt={dt:.6g} violates the explicit stability bound; max admissible dt is {dt_max:.6g}")
        self.dt = dt
        self.dt_max = dt_max


class QuadratureError(RuntimeError):
    pass


@dataclass
class GridProfile:
    """CDF values on the uniform grid ``x_min + h * k``."""

    x_min: float
    h: float
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        self.values = np.ascontiguousarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 3:
            raise ProfileError("a profile needs at least 3 nodes")
        if not self.h > 0:
            raise ProfileError("grid spacing must be positive")

    @classmethod
    def from_law(cls, law: Law, x_min: float, x_max: float, h: float, time: float = 0.0) -> "GridProfile":
        n = int(round((x_max - x_min) / h)) + 1
        x = x_min + h * np.arange(n)
        return cls(x_min, h, law.cdf(x), time)

    @classmethod
    def from_nodes(cls, x, values, time: float = 0.0) -> "GridProfile":
        x = np.asarray(x, dtype=float)
        h = float(x[1] - x[0])
        if not np.allclose(np.diff(x), h, rtol=1e-9, atol=1e-12):
            raise ProfileError("nodes must be uniformly spaced")
        return cls(float(x[0]), h, values, time)

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.h * np.arange(self.size)

    @property
    def x_max(self) -> float:
        return self.x_min + self.h * (self.size - 1)

    def validate(self) -> "GridProfile":
        v = self.values
        if not np.all(np.isfinite(v)):
            raise ProfileError(f"non-finite value at node {int(np.argmax(~np.isfinite(v)))}")
        if v[0] > BOUNDARY_TOL or v[-1] < 1 - BOUNDARY_TOL:
            raise ProfileError(
                f"domain too narrow: F(x_min)={v[0]:.3g}, F(x_max)={v[-1]:.3g} "
                f"(need <= {BOUNDARY_TOL:g} and >= 1-{BOUNDARY_TOL:g})"
            )
        if np.any(v < -MONOTONE_TOL) or np.any(v > 1 + MONOTONE_TOL):
            raise ProfileError("values leave [0, 1]")
        drops = np.diff(v)
        if np.any(drops < -MONOTONE_TOL):
            k = int(np.argmin(drops))
            raise ProfileError(f"profile decreases by {-drops[k]:.3g} between nodes {k} and {k + 1}")
        return self

    def __call__(self, x):
        return np.interp(x, self.x, self.values, left=0.0, right=1.0)

    def density(self) -> np.ndarray:
        return density_from_cdf(self.values, self.h)

    def mean(self) -> float:
        return GridLaw(self.x, self.values).mean

    def to_law(self) -> GridLaw:
        return GridLaw(self.x, self.values)


def density_from_cdf(values, h: float) -> np.ndarray:
    """Central differences inside, one-sided at the two end nodes."""
    return np.gradient(np.asarray(values, dtype=float), h)


def default_domain(law: Law, sigma: float) -> tuple[float, float]:
    """``[x_bar - L, x_bar + L]`` with ``L = 10 sigma^2 + 6 std``."""
    half = 10.0 * sigma**2 + 6.0 * law.std
    m = law.mean
    return m - half, m + half


def max_stable_dt(h: float, flux: FluxFunction, sigma: float) -> float:
    return h * h / (sigma**2 + h * flux.max_abs_derivative)


def _coefficients(h, flux, sigma, dt):
    return sigma**2 * dt / (2 * h * h), dt / (2 * h), np.ascontiguousarray(flux.coeffs, dtype=float)


def _finish(values: np.ndarray, step: int) -> np.ndarray:
    bad = ~np.isfinite(values)
    if bad.any():
        raise SimulationError(f"non-finite value at node {int(np.argmax(bad))} after step {step}")
    drops = np.diff(values)
    if np.any(drops < -MONOTONE_TOL):
        k = int(np.argmin(drops))
        raise SimulationError(
            f"scheme lost monotonicity at node {k} after step {step} (drop {-drops[k]:.3g})"
        )
    # drops below the tolerance are round-off; remove them
    return np.maximum.accumulate(values)


def evolve_pde(profile: GridProfile, flux: FluxFunction, sigma: float, dt: float, n_steps: int,
               check_every: int = 1000) -> GridProfile:
    """Explicit central scheme, ``n_steps`` steps of size ``dt``.

    The kernel clamps to [0, 1] every step; finiteness and monotonicity are
    checked every ``check_every`` steps and at the end.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if not dt > 0 or n_steps < 0:
        raise ValueError("dt must be positive and n_steps nonnegative")
    profile.validate()
    dt_max = max_stable_dt(profile.h, flux, sigma)
    if dt > dt_max * (1 + 1e-12):
        raise StabilityError(dt, dt_max)
    diff_coef, adv_coef, coeffs = _coefficients(profile.h, flux, sigma, dt)
    values = profile.values.copy()
    values[0], values[-1] = 0.0, 1.0
    done = 0
    while done < n_steps:
        chunk = min(check_every, n_steps - done)
        values = kernels.pde_run(values, coeffs, diff_coef, adv_coef, chunk)
        done += chunk
        values = _finish(values, done)
    return GridProfile(profile.x_min, profile.h, values, profile.time + n_steps * dt)


@dataclass
class ProfileSchedule:
    """Profiles at the times ``times[k]`` on a common grid (rows of ``values``)."""

    x_min: float
    h: float
    times: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.times)

    def __getitem__(self, k) -> GridProfile:
        return GridProfile(self.x_min, self.h, self.values[k], float(self.times[k]))

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.h * np.arange(self.values.shape[1])


def pde_schedule(profile: GridProfile, flux: FluxFunction, sigma: float, dt_out: float, n_out: int,
                 dt: float | None = None, safety: float = 0.9) -> ProfileSchedule:
    """Profiles at ``profile.time + k * dt_out`` for ``k = 0..n_out``.

    Each output interval is split into equal sub-steps that satisfy the
    stability bound (``safety`` times the admissible step by default).
    """
    dt_max = max_stable_dt(profile.h, flux, sigma)
    if dt is None:
        dt = safety * dt_max
    m = max(1, math.ceil(dt_out / dt - 1e-9))
    sub = dt_out / m
    values = np.empty((n_out + 1, profile.size))
    values[0] = profile.values
    cur = profile
    for k in range(1, n_out + 1):
        cur = evolve_pde(cur, flux, sigma, sub, m)
        values[k] = cur.values
    times = profile.time + dt_out * np.arange(n_out + 1)
    return ProfileSchedule(profile.x_min, profile.h, times, values)


def _as_law(f0) -> Law:
    if isinstance(f0, GridProfile):
        return f0.to_law()
    if isinstance(f0, Law):
        return f0
    raise TypeError("initial condition must be a Law or a GridProfile")


def cole_hopf_cdf(f0, sigma: float, t: float, x, *, epsabs: float = 1e-13, epsrel: float = 1e-11,
                  z_cut: float = 9.0):
    """Exact Burgers CDF at time ``t`` via the Cole-Hopf quotient.

    The integrals over ``y < 0`` and ``y >= 0`` use the bounded weights
    ``exp(int_{-inf}^y F0 / sigma^2)`` and ``exp(int_y^inf (1 - F0) / sigma^2)``;
    the factor ``exp((x - x_bar)/sigma^2)`` between them is divided out of
    the larger side. Gaussian kernels are cut at ``|z| <= z_cut``.
    """
    if not sigma > 0 or not t > 0:
        raise ValueError("sigma and t must be positive")
    law = _as_law(f0)
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1)
    s2 = sigma * sigma
    x_bar = float(law.right_integral(0.0) - law.left_integral(0.0))
    sd = sigma * math.sqrt(t)
    c_m = flat - 0.5 * t
    c_p = flat + 0.5 * t
    lo_m = np.full_like(flat, -z_cut)
    hi_m = np.clip(-c_m / sd, -z_cut, z_cut)
    lo_p = np.clip(-c_p / sd, -z_cut, z_cut)
    hi_p = np.full_like(flat, z_cut)
    w_m = hi_m - lo_m
    w_p = hi_p - lo_p
    norm = 1.0 / math.sqrt(2 * math.pi)

    def integrand(u):
        zm = lo_m + u * w_m
        zp = lo_p + u * w_p
        ym = c_m + sd * zm
        yp = c_p + sd * zp
        # an empty piece (the kernel cut misses that half-line) contributes 0
        em = np.where(w_m > 0, -0.5 * zm * zm + law.left_integral(np.minimum(ym, 0.0)) / s2, -np.inf)
        ep = np.where(w_p > 0, -0.5 * zp * zp + law.right_integral(np.maximum(yp, 0.0)) / s2, -np.inf)
        gm = norm * np.exp(em) * w_m
        gp = norm * np.exp(ep) * w_p
        return np.concatenate([gm * law.cdf(ym), gm, gp * law.cdf(yp), gp])

    res, err, info = integrate.quad_vec(integrand, 0.0, 1.0, epsabs=epsabs, epsrel=epsrel,
                                        norm="max", limit=20000, full_output=True)
    if not info.success:
        raise QuadratureError(f"Cole-Hopf quadrature did not converge (achieved error {err:.3g}, "
                              f"requested {epsabs:g})")
    k = flat.size
    im_f, im_1, ip_f, ip_1 = res[:k], res[k:2 * k], res[2 * k:3 * k], res[3 * k:]
    log_e = (flat - x_bar) / s2
    down = np.exp(-np.abs(log_e))
    right = log_e > 0
    num = np.where(right, im_f * down + ip_f, im_f + down * ip_f)
    den = np.where(right, im_1 * down + ip_1, im_1 + down * ip_1)
    return np.clip(num / den, 0.0, 1.0).reshape(x.shape)


def cole_hopf_profile(f0, sigma: float, t: float, x_min: float, x_max: float, h: float,
                      **kwargs) -> GridProfile:
    n = int(round((x_max - x_min) / h)) + 1
    x = x_min + h * np.arange(n)
    return GridProfile(x_min, h, cole_hopf_cdf(f0, sigma, t, x, **kwargs), t)


def burgers_limit_cdf(x, x_bar: float, sigma: float):
    """``exp((x - x_bar)/sigma^2) / (1 + exp((x - x_bar)/sigma^2))``."""
    return special.expit((np.asarray(x, dtype=float) - x_bar) / sigma**2)


@dataclass
class NonlinearPath:
    """A batch of independent copies of the nonlinear process, shape ``(replications, n)``."""

    positions: np.ndarray
    time: float = 0.0
    noise: object = None
    step_count: int = field(default=0)

    def __post_init__(self) -> None:
        pos = np.array(self.positions, dtype=float)
        if pos.ndim == 0:
            pos = pos.reshape(1, 1)
        elif pos.ndim == 1:
            pos = pos[None, :]
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        self.positions = np.ascontiguousarray(pos)
        if self.noise is None:
            self.noise = ZeroNoise(pos.shape)

    def advance(self, dt: float, xi: np.ndarray, profile: GridProfile, flux: FluxFunction, sigma: float) -> None:
        f = profile(self.positions)
        drift = flux.a_prime(f)
        self.positions = self.positions + sigma * math.sqrt(dt) * xi - dt * drift
        self.step_count += 1
        self.time += dt
        if not np.all(np.isfinite(self.positions)):
            r, i = np.argwhere(~np.isfinite(self.positions))[0]
            raise SimulationError(
                f"non-finite nonlinear path {i} (replication {r}) at step {self.step_count}"
            )


def simulate_nonlinear(path: NonlinearPath, f_schedule, flux: FluxFunction, sigma: float,
                       dt: float) -> NonlinearPath:
    """Euler-Maruyama on ``dX = sigma dB - A'(F_t(X)) dt`` along the schedule.

    ``f_schedule[k]`` is the profile at ``path.time + k * dt``; one step is
    taken per interval of the schedule.
    """
    times = np.array([p.time for p in f_schedule]) if not isinstance(f_schedule, ProfileSchedule) else f_schedule.times
    if len(times) > 1 and not np.allclose(np.diff(times), dt, rtol=1e-9, atol=1e-12):
        raise ValueError("schedule spacing must equal dt")
    if len(times) and abs(times[0] - path.time) > 1e-9 * max(1.0, abs(path.time)):
        raise ValueError("schedule must start at the path's current time")
    for k in range(len(times) - 1):
        path.advance(dt, path.noise.next(), f_schedule[k], flux, sigma)
    return path


def chi_square_distance(p, p_inf, h: float | None = None, x=None) -> float:
    """Trapezoid value of ``int (p - p_inf)^2 / p_inf`` on a common grid."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(p_inf, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError("densities must be 1-d arrays on the same grid")
    if np.any(q[1:-1] <= 0):
        k = 1 + int(np.argmax(q[1:-1] <= 0))
        raise ValueError(f"reference density is not positive at interior node {k}")
    ratio = np.zeros_like(p)
    ok = q > 0
    ratio[ok] = (p[ok] - q[ok]) ** 2 / q[ok]
    if x is not None:
        return float(integrate.trapezoid(ratio, np.asarray(x, dtype=float)))
    if h is None:
        raise ValueError("give the grid spacing h or the nodes x")
    return float(integrate.trapezoid(ratio, dx=h))
