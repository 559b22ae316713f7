"""Pure numpy implementations of the hot kernels.

Arithmetic is written in the same operation order as ``_kernels.pyx`` so the
two backends agree bit for bit on the particle and PDE updates.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def rank_order(x: np.ndarray, order: np.ndarray) -> None:
    """Sort key ``(value, index)`` per row of ``x``; writes the permutation into ``order``."""
    order[...] = np.argsort(x, axis=-1, kind="stable")


def rank_step(x, a, xi, scale, dt, order) -> None:
    """One Euler step of the rank-based system, in place on ``x`` (rows = ensembles)."""
    rank_order(x, order)
    drift = np.empty_like(x)
    np.put_along_axis(drift, order, np.broadcast_to(a, x.shape), axis=-1)
    x[...] = x + scale * xi - dt * drift


def horner(coeffs, u):
    val = np.full_like(u, coeffs[-1])
    for c in coeffs[-2::-1]:
        val = val * u + c
    return val


def pde_step(f, out, coeffs, diff_coef, adv_coef) -> None:
    """Explicit update of the interior nodes, clamped to [0, 1]; boundary nodes are copied."""
    af = horner(coeffs, f)
    out[0] = f[0]
    out[-1] = f[-1]
    out[1:-1] = np.clip(
        f[1:-1] + (diff_coef * ((f[2:] - 2.0 * f[1:-1]) + f[:-2]) + adv_coef * (af[2:] - af[:-2])),
        0.0, 1.0,
    )


def pde_run(f, coeffs, diff_coef, adv_coef, n_steps) -> np.ndarray:
    cur = np.array(f, dtype=float)
    nxt = np.empty_like(cur)
    for _ in range(n_steps):
        pde_step(cur, nxt, coeffs, diff_coef, adv_coef)
        cur, nxt = nxt, cur
    return cur


def _pivmin(e2) -> float:
    return np.finfo(float).tiny * max(1.0, float(np.max(e2)) if len(e2) else 1.0)


def sturm_count(d, e2, x) -> int:
    """Number of eigenvalues strictly below ``x`` of the symmetric tridiagonal (d, e)."""
    pivmin = _pivmin(e2)
    q = d[0] - x
    if abs(q) < pivmin:
        q = -pivmin
    count = int(q < 0.0)
    for i in range(1, len(d)):
        q = (d[i] - x) - e2[i - 1] / q
        if abs(q) < pivmin:
            q = -pivmin
        if q < 0.0:
            count += 1
    return count


def bisect_smallest(d, e2, lo, hi, tol):
    """Bracket the smallest eigenvalue: returns ``(lo, hi)`` with ``hi - lo <= tol``."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if sturm_count(d, e2, mid) >= 1:
            hi = mid
        else:
            lo = mid
    return lo, hi


def bisect_smallest_many(ds, e2s, los, his, tol):
    """Batch version over a list of matrices: vectorised across matrices."""
    m = len(ds)
    if m == 0:
        return np.empty(0), np.empty(0)
    sizes = np.array([len(d) for d in ds])
    width = int(sizes.max())
    dmat = np.zeros((m, width))
    e2mat = np.zeros((m, max(width - 1, 1)))
    for k, (d, e2) in enumerate(zip(ds, e2s)):
        dmat[k, : len(d)] = d
        e2mat[k, : len(e2)] = e2
    pivmin = np.array([_pivmin(e2) for e2 in e2s])
    lo = np.array(los, dtype=float)
    hi = np.array(his, dtype=float)
    # matrices sorted by size descending so the active set at column i is a prefix
    by_size = np.argsort(-sizes, kind="stable")
    dmat, e2mat, pivmin = dmat[by_size], e2mat[by_size], pivmin[by_size]
    lo, hi, sizes_sorted = lo[by_size], hi[by_size], sizes[by_size]
    active_upto = np.array([np.searchsorted(-sizes_sorted, -(i + 1), side="right") for i in range(width)])
    while True:
        todo = hi - lo > tol
        if not todo.any():
            break
        mid = 0.5 * (lo + hi)
        todo &= (mid > lo) & (mid < hi)
        if not todo.any():
            break
        q = dmat[:, 0] - mid
        q = np.where(np.abs(q) < pivmin, -pivmin, q)
        count = (q < 0.0).astype(np.int64)
        for i in range(1, width):
            k = active_upto[i]
            qi = (dmat[:k, i] - mid[:k]) - e2mat[:k, i - 1] / q[:k]
            qi = np.where(np.abs(qi) < pivmin[:k], -pivmin[:k], qi)
            q[:k] = qi
            count[:k] += qi < 0.0
        has = count >= 1
        hi = np.where(todo & has, mid, hi)
        lo = np.where(todo & ~has, mid, lo)
    out_lo = np.empty(m)
    out_hi = np.empty(m)
    out_lo[by_size] = lo
    out_hi[by_size] = hi
    return out_lo, out_hi
