"""Matrices behind the n-uniform Poincare bound for the projected particle system.

``Q^n = diag(b) L diag(b)`` with ``b(i) = i(n-i)/n`` and ``L = tridiag(-1, 2, -1)``.
Its smallest eigenvalue is bracketed by Sturm-sequence bisection; the
identity checks rebuild the change-of-variables matrices densely.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels

LAMBDA_TILDE_BOUND = 1.0 / 432.0
DENSE_LIMIT = 2000


@dataclass(frozen=True)
class Tridiagonal:
    """Symmetric tridiagonal matrix by its diagonal ``d`` and off-diagonal ``e``."""

    d: np.ndarray
    e: np.ndarray

    def __post_init__(self) -> None:
        d = np.ascontiguousarray(self.d, dtype=float)
        e = np.ascontiguousarray(self.e, dtype=float)
        if d.ndim != 1 or e.shape != (max(d.size - 1, 0),):
            raise ValueError("off-diagonal must have one entry fewer than the diagonal")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "e", e)

    @classmethod
    def from_dense(cls, a) -> "Tridiagonal":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("matrix must be square")
        if not np.array_equal(a, a.T):
            raise ValueError("matrix must be symmetric")
        if np.any(np.triu(a, 2)):
            raise ValueError("matrix must be tridiagonal")
        return cls(np.diag(a).copy(), np.diag(a, 1).copy())

    @property
    def size(self) -> int:
        return self.d.size

    def to_dense(self) -> np.ndarray:
        return np.diag(self.d) + np.diag(self.e, 1) + np.diag(self.e, -1)

    def gershgorin(self) -> tuple[float, float]:
        r = np.zeros_like(self.d)
        r[:-1] += np.abs(self.e)
        r[1:] += np.abs(self.e)
        return float(np.min(self.d - r)), float(np.max(self.d + r))


def b_coefficients(n: int) -> np.ndarray:
    if n < 2:
        raise ValueError("n must be >= 2")
    i = np.arange(1, n)
    return i * (n - i) / n


def laplacian(n: int) -> np.ndarray:
    """Dense ``(n-1) x (n-1)`` matrix ``tridiag(-1, 2, -1)``."""
    m = n - 1
    return 2 * np.eye(m) - np.eye(m, k=1) - np.eye(m, k=-1)


def build_q_matrix(n: int) -> Tridiagonal:
    b = b_coefficients(n)
    return Tridiagonal(2.0 * b * b, -b[:-1] * b[1:])


def _bracket_start(t: Tridiagonal) -> tuple[float, float]:
    lo, _ = t.gershgorin()
    hi = float(np.min(t.d))  # Rayleigh quotient on a unit vector
    width = max(abs(lo), abs(hi), 1.0)
    return lo - 1e-12 * width, hi + 1e-12 * width


def eigen_bracket(tridiag, tol: float = 1e-13) -> tuple[float, float]:
    """``(lo, hi)`` containing the smallest eigenvalue, ``hi - lo <= tol``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    t = tridiag if isinstance(tridiag, Tridiagonal) else Tridiagonal.from_dense(tridiag)
    lo, hi = _bracket_start(t)
    return kernels.bisect_smallest(t.d, t.e * t.e, lo, hi, tol)


def smallest_eigenvalue(tridiag, tol: float = 1e-13) -> float:
    lo, hi = eigen_bracket(tridiag, tol)
    return 0.5 * (lo + hi)


@dataclass
class SpectralReport:
    n: int
    b: np.ndarray
    lambda_tilde: float
    bracket: tuple[float, float]
    lambda_lower: float
    alpha: float
    sigma: float
    identity_checks: dict = field(default_factory=dict)

    paper_bound = LAMBDA_TILDE_BOUND

    @property
    def lambda_bound(self) -> float:
        return self.alpha**2 / (12.0**3 * self.sigma**2)

    @property
    def bound_ok(self) -> bool:
        # the lower end of the bracket is a certified lower bound
        return self.bracket[0] >= LAMBDA_TILDE_BOUND

    @property
    def lambda_lower_ok(self) -> bool:
        return self.alpha**2 / (4 * self.sigma**2) * self.bracket[0] >= self.lambda_bound


def verify_lambda_bound(n_list, alpha: float = 1.0, sigma: float = 1.0, tol: float = 1e-13) -> list[SpectralReport]:
    """One report per ``n``; ``bound_ok`` flags any ``n`` below 1/432."""
    ns = [int(n) for n in n_list]
    if any(n < 2 for n in ns):
        raise ValueError("every n must be >= 2")
    mats = [build_q_matrix(n) for n in ns]
    starts = [_bracket_start(t) for t in mats]
    los, his = kernels.bisect_smallest_many(
        [t.d for t in mats], [t.e * t.e for t in mats], [s[0] for s in starts], [s[1] for s in starts], tol
    )
    out = []
    for n, lo, hi in zip(ns, los, his):
        lam = 0.5 * (lo + hi)
        out.append(SpectralReport(n, b_coefficients(n), lam, (float(lo), float(hi)),
                                  alpha**2 / (4 * sigma**2) * lam, alpha, sigma))
    return out


def matrix_m(n: int) -> np.ndarray:
    m = n - 1
    a = np.eye(m) - np.eye(m, k=-1)
    a[0, :] = 1.0
    a[0, 0] = 2.0
    return a


def matrix_m_inverse(n: int) -> np.ndarray:
    j = np.arange(1, n)[None, :]
    k = np.arange(1, n)[:, None]
    return (j - n * (j > k)) / n


def matrix_n(n: int) -> np.ndarray:
    j = np.arange(1, n)
    return np.vstack([((j - n) / n)[None, :], matrix_m_inverse(n)])


def matrix_r(n: int) -> np.ndarray:
    m = n - 1
    return np.eye(m) - np.eye(m, k=1)


def _dense_guard(n: int) -> None:
    if not 2 <= n <= DENSE_LIMIT:
        raise ValueError(f"dense identity checks need 2 <= n <= {DENSE_LIMIT}")


def verify_matrix_identities(n: int) -> dict[str, bool]:
    """Dense checks of the change-of-variables identities, each within ``1e-8 n``."""
    _dense_guard(n)
    tol = 1e-8 * n
    m, minv, nm, r = matrix_m(n), matrix_m_inverse(n), matrix_n(n), matrix_r(n)
    lap = laplacian(n)
    q = build_q_matrix(n).to_dense()
    eye = np.eye(n - 1)
    sign, logdet = np.linalg.slogdet(m)
    return {
        "M*Minv=I": bool(np.max(np.abs(m @ minv - eye)) <= tol),
        "det(M)=n": bool(sign > 0 and abs(np.exp(logdet) - n) <= tol),
        "M*R=L": bool(np.max(np.abs(m @ r - lap)) <= tol),
        "N^T*N*L=I": bool(np.max(np.abs(nm.T @ nm @ lap - eye)) <= tol),
        "Q symmetric": bool(np.array_equal(q, q.T)),
        "Q tridiagonal": bool(not np.any(np.triu(q, 2))),
    }


def q_from_mass_matrix(n: int) -> np.ndarray:
    """``(Nbar^T Nbar)^{-1}`` with ``Nbar_ij = N_ij / b(j)``, by dense inversion."""
    _dense_guard(n)
    nbar = matrix_n(n) / b_coefficients(n)[None, :]
    return np.linalg.inv(nbar.T @ nbar)


def q_from_hat_functions(n: int) -> np.ndarray:
    """``int (x(1-x) u_i)' (x(1-x) u_j)'`` for the hat functions ``u_i``.

    ``x(1-x) u_i`` is the tent of height ``c_i / n`` on ``[(i-1)/n, (i+1)/n]``
    with ``c_i = i(n-i)/sqrt(n)``, so its derivative is ``+-c_i`` on the two
    cells and the integral is a sum of cell lengths times slope products.
    """
    _dense_guard(n)
    i = np.arange(1, n)
    c = i * (n - i) / np.sqrt(n)
    # slopes[k, cell]: derivative of tent k on cell [cell/n, (cell+1)/n]
    slopes = np.zeros((n - 1, n))
    slopes[i - 1, i - 1] = c
    slopes[i - 1, i] = -c
    return slopes @ slopes.T / n


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(3)


def _cells(nodes, values):
    x = np.asarray(nodes, dtype=float)
    v = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.shape != v.shape or x.size < 2:
        raise ValueError("need matching 1-d node and value arrays")
    if np.any(np.diff(x) <= 0) or x[0] < 0 or x[-1] > 1:
        raise ValueError("nodes must be increasing inside [0, 1]")
    if not np.all(np.isfinite(v)):
        raise ValueError("node values must be finite")
    return x, v


def _gauss(fn, x0, x1):
    mid = 0.5 * (x0 + x1)
    half = 0.5 * (x1 - x0)
    pts = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    return float(np.sum(half[:, None] * _GL_WEIGHTS[None, :] * fn(pts)))


def verify_hardy(nodes, values) -> tuple[float, float]:
    """``(int u^2, 16 int ((x(1-x) u)')^2)`` for ``u`` piecewise linear on ``nodes``.

    ``u`` is zero outside the node range. Both integrands are polynomials of
    degree at most 4 on each cell, so 3-point Gauss-Legendre is exact.
    """
    x, v = _cells(nodes, values)
    x0, x1 = x[:-1], x[1:]
    slope = np.diff(v) / np.diff(x)
    base = v[:-1]

    def u(p):
        return base[:, None] + slope[:, None] * (p - x0[:, None])

    def dw(p):
        # (x(1-x)u)' = (1-2x) u + x(1-x) u'
        return (1 - 2 * p) * u(p) + p * (1 - p) * slope[:, None]

    lhs = _gauss(lambda p: u(p) ** 2, x0, x1)
    rhs = 16.0 * _gauss(lambda p: dw(p) ** 2, x0, x1)
    return lhs, rhs


def verify_hardy_weighted(nodes, values) -> tuple[float, float]:
    """Same pair when ``w = x(1-x) u`` (not ``u``) is piecewise linear with the given node values.

    On a cell ``w = p + q x`` gives ``u = p/x + (p+q)/(1-x)``, integrated in
    closed form; ``lhs`` is infinite if ``w`` does not vanish at 0 or 1.
    """
    x, w = _cells(nodes, values)
    lhs = 0.0
    rhs = 0.0
    for k in range(x.size - 1):
        a0, a1 = x[k], x[k + 1]
        q = (w[k + 1] - w[k]) / (a1 - a0)
        p = w[k] - q * a0
        c = p + q
        rhs += q * q * (a1 - a0)
        if p == 0.0 and c == 0.0:
            continue
        if (p != 0.0 and a0 == 0.0) or (c != 0.0 and a1 == 1.0):
            lhs = float("inf")
            continue

        def prim(s):
            val = c * c / (1 - s) if c != 0.0 else 0.0
            if p != 0.0:
                val -= p * p / s
            if p != 0.0 and c != 0.0:
                val += 2 * p * c * (np.log(s) - np.log1p(-s))
            return val

        # singular terms are skipped when their coefficient is 0, so prim is finite at 0 and 1 here
        lhs += prim(a1) - prim(a0)
    return float(lhs), 16.0 * float(rhs)


def hat_function_nodes(n: int, i: int, points_per_cell: int = 1):
    """Nodes and ``x(1-x) u_i`` values of the proof's hat function, for :func:`verify_hardy_weighted`."""
    if not 1 <= i <= n - 1:
        raise ValueError("need 1 <= i <= n-1")
    height = i * (n - i) / np.sqrt(n) / n
    x = np.linspace(0.0, 1.0, n * points_per_cell + 1)
    w = np.clip(height - np.abs(x - i / n) * i * (n - i) / np.sqrt(n), 0.0, None)
    return x, w
