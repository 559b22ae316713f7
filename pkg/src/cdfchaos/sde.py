"""Euler-Maruyama simulation of the rank-based particle system.

Particle ``i`` moves by ``sigma * sqrt(dt) * xi_i - a_n(rank_i) * dt`` where
``rank_i = #{j : x_j <= x_i}`` with ties broken by particle index. Positions
are held as a ``(replications, n)`` array; each row is an independent copy of
the n-particle system.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .rng import NoiseSource


class SimulationError(RuntimeError):
    pass


class ZeroNoise:
    """Noise source that always returns zeros (deterministic drift-only steps)."""

    def __init__(self, shape):
        self.shape = tuple(shape)
        self.steps_drawn = 0

    def next(self) -> np.ndarray:
        self.steps_drawn += 1
        return np.zeros(self.shape)


def ranks(positions) -> np.ndarray:
    """1-based ranks along the last axis; ties go to the lower index first."""
    x = np.asarray(positions, dtype=float)
    order = np.argsort(x, axis=-1, kind="stable")
    out = np.empty(x.shape, dtype=np.int64)
    np.put_along_axis(out, order, np.broadcast_to(np.arange(1, x.shape[-1] + 1), x.shape), axis=-1)
    return out


@dataclass
class ParticleEnsemble:
    positions: np.ndarray
    sigma: float
    drift_coeffs: np.ndarray
    noise: object = None
    time: float = 0.0
    step_count: int = 0
    _order: np.ndarray = field(default=None, repr=False)

    def __post_init__(self) -> None:
        pos = np.array(self.positions, dtype=float)
        if pos.ndim == 1:
            pos = pos[None, :]
        if pos.ndim != 2:
            raise ValueError("positions must be (n,) or (replications, n)")
        self.positions = np.ascontiguousarray(pos)
        self.drift_coeffs = np.ascontiguousarray(self.drift_coeffs, dtype=float)
        if self.drift_coeffs.shape != (pos.shape[1],):
            raise ValueError("drift_coeffs must have one entry per particle")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        if self.noise is None:
            self.noise = ZeroNoise(pos.shape)
        if tuple(self.noise.shape) != pos.shape:
            raise ValueError(f"noise shape {self.noise.shape} != positions shape {pos.shape}")
        self._order = np.ascontiguousarray(np.argsort(pos, axis=1, kind="stable").astype(np.int64))

    @classmethod
    def seeded(cls, positions, sigma, drift_coeffs, seed: int, replications=None, block: int = 256):
        pos = np.atleast_2d(np.asarray(positions, dtype=float))
        reps = range(pos.shape[0]) if replications is None else replications
        return cls(pos, sigma, drift_coeffs, NoiseSource(seed, pos.shape[1], reps, block))

    @property
    def n(self) -> int:
        return self.positions.shape[1]

    def copy_with(self, positions=None, noise=None) -> "ParticleEnsemble":
        return ParticleEnsemble(
            self.positions.copy() if positions is None else positions,
            self.sigma, self.drift_coeffs.copy(), noise if noise is not None else ZeroNoise(self.positions.shape),
            self.time, self.step_count,
        )

    def advance(self, dt: float, xi: np.ndarray) -> None:
        """Apply one step with the given standard Gaussian increments."""
        kernels.rank_step(self.positions, self.drift_coeffs, xi, self.sigma * np.sqrt(dt), dt, self._order)
        self.step_count += 1
        self.time += dt
        if not np.all(np.isfinite(self.positions)):
            r, i = np.argwhere(~np.isfinite(self.positions))[0]
            raise SimulationError(
                f"non-finite position for particle {i} (replication {r}) at step {self.step_count}"
            )

    def step(self, dt: float) -> "ParticleEnsemble":
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.advance(dt, self.noise.next())
        return self

    def ranks(self) -> np.ndarray:
        return ranks(self.positions)

    def mean(self) -> np.ndarray:
        return self.positions.mean(axis=1)


def step(ensemble: ParticleEnsemble, dt: float) -> ParticleEnsemble:
    return ensemble.step(dt)


def project_to_mean_hyperplane(positions, x_bar: float = 0.0) -> np.ndarray:
    """``x_bar + x_i - mean(x)`` along the last axis.

    Accepts a :class:`ParticleEnsemble` (projected copy of its positions) or
    an array.
    """
    x = positions.positions if isinstance(positions, ParticleEnsemble) else np.asarray(positions, dtype=float)
    return x_bar + (x - x.mean(axis=-1, keepdims=True))


@dataclass
class CoupledEnsembles:
    """Two particle systems driven by the same Brownian increments."""

    primary: ParticleEnsemble
    twin: ParticleEnsemble
    noise: object = None
    shared_noise: bool = True

    def __post_init__(self) -> None:
        if not self.shared_noise:
            raise ValueError("coupled ensembles must share their noise")
        if self.primary.positions.shape != self.twin.positions.shape:
            raise ValueError("primary and twin must have the same shape")
        if self.primary.sigma != self.twin.sigma or not np.array_equal(
            self.primary.drift_coeffs, self.twin.drift_coeffs
        ):
            raise ValueError("primary and twin must share sigma and drift_coeffs")
        if self.noise is None:
            self.noise = self.primary.noise

    def step(self, dt: float) -> "CoupledEnsembles":
        if not dt > 0:
            raise ValueError("dt must be positive")
        xi = self.noise.next()
        self.primary.advance(dt, xi)
        self.twin.advance(dt, xi)
        return self


def step_coupled(pair: CoupledEnsembles, dt: float) -> CoupledEnsembles:
    return pair.step(dt)


def _nondecreasing(v) -> bool:
    return bool(np.all(np.diff(v) >= 0))


def check_rearrangement(a, b, tau) -> bool:
    """Whether ``sum a(i) b(tau(i)) <= sum a(i) b(i)`` for nondecreasing ``a``, ``b``.

    ``tau`` is a 0-based permutation. The comparison allows a round-off
    margin relative to the magnitude of the terms.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    tau = np.asarray(tau)
    if not (a.shape == b.shape == tau.shape and a.ndim == 1):
        raise ValueError("a, b and tau must be 1-d with equal length")
    if not (_nondecreasing(a) and _nondecreasing(b)):
        raise ValueError("a and b must be nondecreasing")
    if not np.array_equal(np.sort(tau), np.arange(len(tau))):
        raise ValueError("tau must be a permutation of 0..n-1")
    permuted = float(np.dot(a, b[tau]))
    identity = float(np.dot(a, b))
    slack = 1e-12 * float(np.dot(np.abs(a), np.abs(b)) + 1.0)
    return permuted <= identity + slack
