"""Flux primitive ``A`` on [0, 1] and the structural checks built on it.

Every flux is a polynomial with explicit coefficients (ascending powers), so
derivatives, the Lipschitz constant of ``A'`` and the uniform-convexity
constant are exact rather than estimated by numerical differentiation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial

DEFAULT_GRID_POINTS = 10_001


class FluxKind(str, enum.Enum):
    BURGERS = "burgers"
    CUBIC = "cubic"
    POLY = "poly"


@dataclass(frozen=True)
class FluxFunction:
    """A polynomial flux ``A`` with ``A(0) = 0``.

    ``lipschitz_k`` is the Lipschitz constant of ``A'`` on [0, 1] (that is
    ``sup |A''|``) and ``alpha`` the uniform-convexity constant
    ``inf A''`` clipped at zero.
    """

    coeffs: tuple[float, ...]
    kind: FluxKind = FluxKind.POLY
    lipschitz_k: float = field(default=float("nan"))
    alpha: float = field(default=float("nan"))

    def __post_init__(self) -> None:
        if len(self.coeffs) == 0:
            raise ValueError("flux needs at least one coefficient")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("flux coefficients must be finite")
        if self.coeffs[0] != 0.0:
            raise ValueError(f"A(0) must be 0, got constant term {self.coeffs[0]!r}")
        poly = Polynomial(self.coeffs)
        object.__setattr__(self, "_poly", poly)
        object.__setattr__(self, "_d1", poly.deriv(1))
        object.__setattr__(self, "_d2", poly.deriv(2))
        k, alpha = _second_derivative_bounds(poly.deriv(2))
        if np.isnan(self.lipschitz_k):
            object.__setattr__(self, "lipschitz_k", k)
        if np.isnan(self.alpha):
            object.__setattr__(self, "alpha", alpha)

    def a(self, u):
        return self._poly(u)

    def a_prime(self, u):
        return self._d1(u)

    def a_second(self, u):
        return self._d2(u)

    __call__ = a

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def max_abs_derivative(self) -> float:
        """``sup_{[0,1]} |A'|``, used by the PDE stability bound."""
        return _sup_abs_on_unit(self._d1)

    def is_convex(self, grid_points: int = DEFAULT_GRID_POINTS) -> bool:
        u = np.linspace(0.0, 1.0, grid_points)
        return bool(np.all(self._d2(u) >= -1e-14))

    def to_config(self) -> dict:
        if self.kind is FluxKind.POLY:
            return {"kind": "poly", "coeffs": list(self.coeffs)}
        return {"kind": self.kind.value}


def _critical_points_on_unit(poly: Polynomial) -> np.ndarray:
    pts = [0.0, 1.0]
    if poly.degree() >= 2:
        for r in poly.deriv().roots():
            if abs(r.imag) < 1e-12 and 0.0 <= r.real <= 1.0:
                pts.append(float(r.real))
    return np.asarray(pts)


def _sup_abs_on_unit(poly: Polynomial) -> float:
    pts = _critical_points_on_unit(poly)
    return float(np.max(np.abs(poly(pts))))


def _second_derivative_bounds(d2: Polynomial) -> tuple[float, float]:
    pts = _critical_points_on_unit(d2)
    vals = d2(pts)
    return float(np.max(np.abs(vals))), float(max(np.min(vals), 0.0))


def polynomial_flux(coeffs: Sequence[float], **kw) -> FluxFunction:
    return FluxFunction(tuple(float(c) for c in coeffs), FluxKind.POLY, **kw)


def make_builtin_flux(kind: str | FluxKind) -> FluxFunction:
    """Burgers ``A(x) = x(x-1)/2`` or cubic ``A(x) = x^3 - x``."""
    kind = FluxKind(kind)
    if kind is FluxKind.BURGERS:
        return FluxFunction((0.0, -0.5, 0.5), kind)
    if kind is FluxKind.CUBIC:
        return FluxFunction((0.0, -1.0, 0.0, 1.0), kind)
    raise ValueError(f"{kind.value!r} is not a built-in flux; use polynomial_flux")


def flux_from_config(block: dict) -> FluxFunction:
    """Build a flux from a config block with ``kind`` and optional ``coeffs``."""
    kind = FluxKind(str(block.get("kind", "burgers")).lower())
    if kind is FluxKind.POLY:
        if "coeffs" not in block:
            raise ValueError("flux.kind = 'poly' requires flux.coeffs")
        return polynomial_flux(block["coeffs"])
    return make_builtin_flux(kind)


def parse_flux(text: str, coeffs: str | None = None) -> FluxFunction:
    """CLI form: ``burgers``, ``cubic``, ``poly:0,-1,1`` or ``poly`` + coeffs."""
    name, _, rest = text.partition(":")
    name = name.strip().lower()
    if name == "poly":
        raw = rest or coeffs
        if not raw:
            raise ValueError("poly flux needs coefficients, e.g. poly:0,-0.5,0.5")
        return polynomial_flux([float(c) for c in raw.split(",")])
    return make_builtin_flux(name)


@dataclass
class HypothesisReport:
    h_holds: bool
    violations: list[str]
    clauses: dict[str, bool]


def _finite_eval(fn: Callable, u, what: str) -> np.ndarray:
    val = np.asarray(fn(u), dtype=float)
    if not np.all(np.isfinite(val)):
        raise ValueError(f"{what} returned non-finite values")
    return val


def check_hypothesis_h(flux, grid_points: int = DEFAULT_GRID_POINTS) -> HypothesisReport:
    """Check ``A(0)=A(1)=0``, ``A'(0)<0``, ``A'(1)>0`` and ``A<0`` inside (0, 1).

    Each clause is reported separately; the interior clause is evaluated on a
    uniform grid of ``grid_points`` nodes (endpoints excluded).
    """
    if grid_points < 3:
        raise ValueError("grid_points must be >= 3")
    ends = np.array([0.0, 1.0])
    a_ends = _finite_eval(flux.a, ends, "A")
    d_ends = _finite_eval(flux.a_prime, ends, "A'")
    u = np.linspace(0.0, 1.0, grid_points)[1:-1]
    a_in = _finite_eval(flux.a, u, "A")
    clauses = {
        "A(0)=0": abs(a_ends[0]) <= 1e-14,
        "A(1)=0": abs(a_ends[1]) <= 1e-14,
        "A'(0)<0": bool(d_ends[0] < 0.0),
        "A'(1)>0": bool(d_ends[1] > 0.0),
        "A<0 on (0,1)": bool(np.all(a_in < 0.0)),
    }
    violations = [name for name, ok in clauses.items() if not ok]
    if not clauses["A<0 on (0,1)"]:
        bad = u[a_in >= 0.0]
        violations[-1] = f"A<0 on (0,1) (fails at {bad.size} nodes, first u={bad[0]:.6g})"
    return HypothesisReport(not violations, violations, clauses)


def drift_coefficients(flux, n: int) -> np.ndarray:
    """Rank drift ``a_n(i) = n (A(i/n) - A((i-1)/n))`` for ``i = 1..n``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    a = np.asarray(flux.a(np.arange(n + 1) / n), dtype=float)
    return n * np.diff(a)
