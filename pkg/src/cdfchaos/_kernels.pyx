# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: rank-based Euler step, explicit PDE step, Sturm bisection.

Same signatures and operation order as ``cdfchaos._fallback``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

BACKEND = "compiled"

cdef double DBL_TINY = 2.2250738585072014e-308


cdef inline bint _key_less(const double[::1] x, Py_ssize_t i, Py_ssize_t j) noexcept nogil:
    # (value, index) lexicographic order; the tie rule of the rank drift
    return x[i] < x[j] or (x[i] == x[j] and i < j)


cdef void _insertion_sort(const double[::1] x, cnp.int64_t[::1] order) noexcept nogil:
    # order holds the previous permutation, so it is nearly sorted between steps
    cdef Py_ssize_t n = order.shape[0], k, m
    cdef cnp.int64_t cur
    for k in range(1, n):
        cur = order[k]
        m = k - 1
        while m >= 0 and _key_less(x, cur, order[m]):
            order[m + 1] = order[m]
            m -= 1
        order[m + 1] = cur


def rank_order(double[:, ::1] x, cnp.int64_t[:, ::1] order):
    """Sort each row by (value, index); ``order`` must hold a permutation on entry."""
    cdef Py_ssize_t r
    with nogil:
        for r in range(x.shape[0]):
            _insertion_sort(x[r], order[r])


def rank_step(double[:, ::1] x, const double[::1] a, const double[:, ::1] xi,
              double scale, double dt, cnp.int64_t[:, ::1] order):
    cdef Py_ssize_t r, k, i, n = x.shape[1]
    with nogil:
        for r in range(x.shape[0]):
            _insertion_sort(x[r], order[r])
            for k in range(n):
                i = order[r, k]
                x[r, i] = x[r, i] + scale * xi[r, i] - dt * a[k]


cdef inline double _horner(const double[::1] c, double u) noexcept nogil:
    cdef Py_ssize_t k = c.shape[0] - 1
    cdef double val = c[k]
    while k > 0:
        k -= 1
        val = val * u + c[k]
    return val


cdef void _pde_step(const double[::1] f, double[::1] out, double[::1] af,
                    const double[::1] coeffs, double diff_coef, double adv_coef) noexcept nogil:
    cdef Py_ssize_t i, n = f.shape[0]
    for i in range(n):
        af[i] = _horner(coeffs, f[i])
    out[0] = f[0]
    out[n - 1] = f[n - 1]
    cdef double v
    for i in range(1, n - 1):
        v = f[i] + (diff_coef * ((f[i + 1] - 2.0 * f[i]) + f[i - 1])
                    + adv_coef * (af[i + 1] - af[i - 1]))
        # clamp to [0, 1]; NaN passes through so the caller can report it
        if v < 0.0:
            v = 0.0
        elif v > 1.0:
            v = 1.0
        out[i] = v


def pde_step(const double[::1] f, double[::1] out, const double[::1] coeffs,
             double diff_coef, double adv_coef):
    cdef double[::1] af = np.empty(f.shape[0])
    with nogil:
        _pde_step(f, out, af, coeffs, diff_coef, adv_coef)


def pde_run(f, const double[::1] coeffs, double diff_coef, double adv_coef, Py_ssize_t n_steps):
    cdef double[::1] cur = np.array(f, dtype=np.float64)
    cdef double[::1] nxt = np.empty_like(cur)
    cdef double[::1] af = np.empty_like(cur)
    cdef double[::1] tmp
    cdef Py_ssize_t s
    with nogil:
        for s in range(n_steps):
            _pde_step(cur, nxt, af, coeffs, diff_coef, adv_coef)
            tmp = cur
            cur = nxt
            nxt = tmp
    return np.asarray(cur)


cdef double _pivmin(const double[::1] e2) noexcept nogil:
    cdef double m = 1.0
    cdef Py_ssize_t i
    for i in range(e2.shape[0]):
        if e2[i] > m:
            m = e2[i]
    return DBL_TINY * m


cdef Py_ssize_t _sturm_count(const double[::1] d, const double[::1] e2, double x,
                             double pivmin) noexcept nogil:
    cdef Py_ssize_t i, count = 0, n = d.shape[0]
    cdef double q = d[0] - x
    if fabs(q) < pivmin:
        q = -pivmin
    if q < 0.0:
        count += 1
    for i in range(1, n):
        q = (d[i] - x) - e2[i - 1] / q
        if fabs(q) < pivmin:
            q = -pivmin
        if q < 0.0:
            count += 1
    return count


def sturm_count(const double[::1] d, const double[::1] e2, double x):
    return _sturm_count(d, e2, x, _pivmin(e2))


cdef void _bisect(const double[::1] d, const double[::1] e2, double* lo, double* hi,
                  double tol) noexcept nogil:
    cdef double mid, pivmin = _pivmin(e2)
    while hi[0] - lo[0] > tol:
        mid = 0.5 * (lo[0] + hi[0])
        if mid <= lo[0] or mid >= hi[0]:
            break
        if _sturm_count(d, e2, mid, pivmin) >= 1:
            hi[0] = mid
        else:
            lo[0] = mid


def bisect_smallest(const double[::1] d, const double[::1] e2, double lo, double hi, double tol):
    with nogil:
        _bisect(d, e2, &lo, &hi, tol)
    return lo, hi


def bisect_smallest_many(ds, e2s, los, his, double tol):
    cdef Py_ssize_t k, m = len(ds)
    cdef double lo, hi
    cdef const double[::1] d
    cdef const double[::1] e2
    out_lo = np.empty(m)
    out_hi = np.empty(m)
    for k in range(m):
        d = np.ascontiguousarray(ds[k], dtype=np.float64)
        e2 = np.ascontiguousarray(e2s[k], dtype=np.float64)
        lo = los[k]
        hi = his[k]
        with nogil:
            _bisect(d, e2, &lo, &hi, tol)
        out_lo[k] = lo
        out_hi[k] = hi
    return out_lo, out_hi
