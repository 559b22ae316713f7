"""Initial probability laws on the line.

Besides the CDF each law exposes the two tail integrals
``left_integral(y) = int_{-inf}^y F`` and ``right_integral(y) = int_y^inf (1 - F)``,
which the Cole-Hopf representation needs, and a quantile function used to
draw initial positions by inversion.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import special


class Law:
    def cdf(self, x):
        raise NotImplementedError

    def left_integral(self, y):
        raise NotImplementedError

    def right_integral(self, y):
        raise NotImplementedError

    @property
    def mean(self) -> float:
        # E X = int_0^inf (1 - F) - int_-inf^0 F
        return float(self.right_integral(0.0) - self.left_integral(0.0))

    @property
    def std(self) -> float:
        raise NotImplementedError

    def quantile(self, u):
        return _numeric_quantile(self, u)

    def sample(self, u):
        return self.quantile(u)


def _numeric_quantile(law: Law, u, iters: int = 80):
    u = np.asarray(u, dtype=float)
    width = 60.0 * max(law.std, 1e-12)
    lo = np.full(u.shape, law.mean - width)
    hi = np.full(u.shape, law.mean + width)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = law.cdf(mid) < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return hi


@dataclass(frozen=True)
class Gaussian(Law):
    mu: float = 0.0
    sd: float = 1.0

    def cdf(self, x):
        return special.ndtr((np.asarray(x, dtype=float) - self.mu) / self.sd)

    def pdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self.sd
        return np.exp(-0.5 * z * z) / (self.sd * np.sqrt(2 * np.pi))

    def left_integral(self, y):
        y = np.asarray(y, dtype=float)
        z = (y - self.mu) / self.sd
        return (y - self.mu) * special.ndtr(z) + self.sd * np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi)

    def right_integral(self, y):
        y = np.asarray(y, dtype=float)
        z = (y - self.mu) / self.sd
        return self.sd * np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi) - (y - self.mu) * special.ndtr(-z)

    @property
    def mean(self) -> float:
        return self.mu

    @property
    def std(self) -> float:
        return self.sd

    def quantile(self, u):
        return self.mu + self.sd * special.ndtri(u)


@dataclass(frozen=True)
class Uniform(Law):
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError("uniform law needs a < b")

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.a) / (self.b - self.a), 0.0, 1.0)

    def left_integral(self, y):
        y = np.asarray(y, dtype=float)
        w = self.b - self.a
        inside = np.clip(y, self.a, self.b)
        return (inside - self.a) ** 2 / (2 * w) + np.maximum(y - self.b, 0.0)

    def right_integral(self, y):
        y = np.asarray(y, dtype=float)
        w = self.b - self.a
        inside = np.clip(y, self.a, self.b)
        return (self.b - inside) ** 2 / (2 * w) + np.maximum(self.a - y, 0.0)

    @property
    def mean(self) -> float:
        return 0.5 * (self.a + self.b)

    @property
    def std(self) -> float:
        return (self.b - self.a) / np.sqrt(12.0)

    def quantile(self, u):
        return self.a + (self.b - self.a) * np.asarray(u, dtype=float)


@dataclass(frozen=True)
class Logistic(Law):
    """CDF ``1 / (1 + exp(-(x - mu) / s))``; the Burgers stationary profile has ``s = sigma^2``."""

    mu: float = 0.0
    s: float = 1.0

    def cdf(self, x):
        return special.expit((np.asarray(x, dtype=float) - self.mu) / self.s)

    def pdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / (2 * self.s)
        return 1.0 / (4 * self.s * np.cosh(z) ** 2)

    def left_integral(self, y):
        return self.s * np.logaddexp(0.0, (np.asarray(y, dtype=float) - self.mu) / self.s)

    def right_integral(self, y):
        return self.s * np.logaddexp(0.0, -(np.asarray(y, dtype=float) - self.mu) / self.s)

    @property
    def mean(self) -> float:
        return self.mu

    @property
    def std(self) -> float:
        return self.s * np.pi / np.sqrt(3.0)

    def quantile(self, u):
        return self.mu + self.s * special.logit(u)


class Mixture(Law):
    def __init__(self, components, weights):
        w = np.asarray(weights, dtype=float)
        if len(components) != len(w) or np.any(w < 0) or not np.isclose(w.sum(), 1.0):
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        self.components = list(components)
        self.weights = w

    def _combine(self, name, x):
        return sum(w * getattr(c, name)(x) for c, w in zip(self.components, self.weights))

    def cdf(self, x):
        return self._combine("cdf", x)

    def pdf(self, x):
        return self._combine("pdf", x)

    def left_integral(self, y):
        return self._combine("left_integral", y)

    def right_integral(self, y):
        return self._combine("right_integral", y)

    @property
    def std(self) -> float:
        m = self.mean
        second = sum(w * (c.std ** 2 + c.mean ** 2) for c, w in zip(self.components, self.weights))
        return float(np.sqrt(max(second - m * m, 0.0)))


class GridLaw(Law):
    """Law given by CDF values on nodes; 0 left of the first node and 1 right of the last."""

    def __init__(self, x, values):
        x = np.asarray(x, dtype=float)
        f = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
        if x.ndim != 1 or x.shape != f.shape or x.size < 2:
            raise ValueError("grid law needs matching 1-d node and value arrays")
        if np.any(np.diff(x) <= 0):
            raise ValueError("grid nodes must be increasing")
        if np.any(np.diff(f) < -1e-10):
            raise ValueError("CDF values must be nondecreasing")
        self.x = x
        self.f = np.maximum.accumulate(f)
        dx = np.diff(x)
        self._left = np.concatenate([[0.0], np.cumsum(0.5 * dx * (self.f[1:] + self.f[:-1]))])
        g = 1.0 - self.f
        seg = 0.5 * dx * (g[1:] + g[:-1])
        self._right = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])

    @classmethod
    def from_csv(cls, path):
        xs, fs = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    xs.append(float(row[0]))
                    fs.append(float(row[1]))
                except ValueError:
                    continue  # header line
        return cls(xs, fs)

    def cdf(self, x):
        return np.interp(x, self.x, self.f, left=0.0, right=1.0)

    def _piece(self, y, table, fvals):
        # exact integral of the piecewise-linear interpolant from x[0] to y
        y = np.asarray(y, dtype=float)
        yc = np.clip(y, self.x[0], self.x[-1])
        k = np.clip(np.searchsorted(self.x, yc, side="right") - 1, 0, self.x.size - 2)
        x0 = self.x[k]
        h = self.x[k + 1] - x0
        s = yc - x0
        slope = (fvals[k + 1] - fvals[k]) / h
        return table[k] + s * fvals[k] + 0.5 * slope * s * s, yc

    def left_integral(self, y):
        y = np.asarray(y, dtype=float)
        val, yc = self._piece(y, self._left, self.f)
        return val + np.maximum(y - self.x[-1], 0.0)

    def right_integral(self, y):
        y = np.asarray(y, dtype=float)
        g = 1.0 - self.f
        partial, yc = self._piece(y, np.zeros_like(self._right), g)
        # int_y^{x_max} g = int_{x_k}^{x_max} g - int_{x_k}^{y} g
        k = np.clip(np.searchsorted(self.x, yc, side="right") - 1, 0, self.x.size - 2)
        val = self._right[k] - partial
        return val + np.maximum(self.x[0] - y, 0.0)

    @property
    def std(self) -> float:
        p = np.gradient(self.f, self.x)
        m = self.mean
        return float(np.sqrt(max(np.trapezoid((self.x - m) ** 2 * p, self.x), 0.0)))

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        k = np.clip(np.searchsorted(self.f, u, side="left"), 1, self.x.size - 1)
        f0, f1 = self.f[k - 1], self.f[k]
        w = np.where(f1 > f0, (u - f0) / np.where(f1 > f0, f1 - f0, 1.0), 1.0)
        return self.x[k - 1] + np.clip(w, 0.0, 1.0) * (self.x[k] - self.x[k - 1])


def parse_law(text: str) -> Law:
    """``gaussian:mu,sd``, ``uniform:a,b``, ``logistic:mu,s`` or ``file:path``."""
    name, _, rest = text.partition(":")
    name = name.strip().lower()
    if name == "file":
        return GridLaw.from_csv(rest)
    args = [float(v) for v in rest.split(",")] if rest else []
    if name in ("gaussian", "normal"):
        return Gaussian(*(args or [0.0, 1.0]))
    if name == "uniform":
        return Uniform(*(args or [0.0, 1.0]))
    if name == "logistic":
        return Logistic(*(args or [0.0, 1.0]))
    raise ValueError(f"unknown initial law {text!r}")
