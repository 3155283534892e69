# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled O(n^2 p) kernels.

Every routine mirrors a function in :mod:`bbis._pykernels` with the same
signature. Parallel loops split work by output row; each entry is produced by
exactly one thread and row partial sums are reduced serially afterwards, so
results do not depend on the thread schedule.
"""

import numpy as np

cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport exp, log, sqrt, INFINITY

cnp.import_array()


cdef inline double _sqdist(const double[:, ::1] a, Py_ssize_t i,
                           const double[:, ::1] b, Py_ssize_t j,
                           Py_ssize_t p) noexcept nogil:
    cdef Py_ssize_t k
    cdef double s = 0.0, d
    for k in range(p):
        d = a[i, k] - b[j, k]
        s = s + d * d
    return s


def sq_dists(const double[:, ::1] z, int num_threads=1):
    cdef Py_ssize_t n = z.shape[0], p = z.shape[1], i, j
    out = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    # full rows: the entries are bitwise symmetric, and contiguous writes beat
    # halving the flops with a transposed mirror
    for i in prange(n, nogil=True, num_threads=num_threads, schedule="static"):
        for j in range(n):
            o[i, j] = _sqdist(z, i, z, j, p)
    return out


def energy_log_matrix(const double[::1] log_gamma, const double[:, ::1] sq,
                      double p, double k, double delta, int num_threads=1):
    cdef Py_ssize_t n = log_gamma.shape[0], i, j
    cdef double c = 1.0 / (2.0 * p), v
    out = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    for i in prange(n, nogil=True, num_threads=num_threads, schedule="static"):
        for j in range(i, n):
            v = -k * ((log_gamma[i] + log_gamma[j]) * c + 0.5 * log(sq[i, j] + delta))
            o[i, j] = v
            o[j, i] = v
    return out


cdef inline double _stein_entry(const double[:, ::1] x, const double[:, ::1] s,
                                Py_ssize_t i, Py_ssize_t j, Py_ssize_t p,
                                double inv_l2) noexcept nogil:
    cdef Py_ssize_t a
    cdef double r2 = 0.0, ss = 0.0, proj = 0.0, d, b, b3
    for a in range(p):
        d = x[i, a] - x[j, a]
        r2 = r2 + d * d
        ss = ss + s[i, a] * s[j, a]
        proj = proj + d * (s[i, a] - s[j, a])
    r2 = r2 * inv_l2
    b = 1.0 / sqrt(1.0 + r2)
    b3 = b * b * b
    return (b * ss + b3 * proj * inv_l2 + p * b3 * inv_l2
            - 3.0 * r2 * inv_l2 * b3 * b * b)


def stein_matrix(const double[:, ::1] x, const double[:, ::1] scores, double ell,
                 int num_threads=1):
    cdef Py_ssize_t n = x.shape[0], p = x.shape[1], i, j
    cdef double inv_l2 = 1.0 / (ell * ell), v
    out = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    for i in prange(n, nogil=True, num_threads=num_threads, schedule="static"):
        for j in range(i, n):
            v = _stein_entry(x, scores, i, j, p, inv_l2)
            o[i, j] = v
            o[j, i] = v
    return out


def row_distance_sums(const double[:, ::1] x, const double[:, ::1] y, int num_threads=1):
    cdef Py_ssize_t n = x.shape[0], m = y.shape[0], p = x.shape[1], i, j
    cdef double acc
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    for i in prange(n, nogil=True, num_threads=num_threads, schedule="static"):
        acc = 0.0
        for j in range(m):
            acc = acc + sqrt(_sqdist(x, i, y, j, p))
        o[i] = acc
    return out


def weighted_self_distance(const double[:, ::1] x, const double[::1] w, int num_threads=1):
    cdef Py_ssize_t n = x.shape[0], p = x.shape[1], i, j
    cdef double acc
    rows = np.empty(n, dtype=np.float64)
    cdef double[::1] r = rows
    for i in prange(n, nogil=True, num_threads=num_threads, schedule="static"):
        acc = 0.0
        for j in range(i + 1, n):
            acc = acc + w[j] * sqrt(_sqdist(x, i, x, j, p))
        r[i] = w[i] * acc
    return 2.0 * float(np.sum(rows))


def pair_distance_sum(const double[:, ::1] y, int num_threads=1):
    cdef Py_ssize_t n = y.shape[0], p = y.shape[1], i, j
    cdef double acc
    rows = np.empty(n, dtype=np.float64)
    cdef double[::1] r = rows
    for i in prange(n, nogil=True, num_threads=num_threads, schedule="static"):
        acc = 0.0
        for j in range(i + 1, n):
            acc = acc + sqrt(_sqdist(y, i, y, j, p))
        r[i] = acc
    return float(np.sum(rows))


def sampled_pair_distances(const double[:, ::1] y, const cnp.int64_t[::1] a,
                           const cnp.int64_t[::1] b, int num_threads=1):
    cdef Py_ssize_t m = a.shape[0], p = y.shape[1], t
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    for t in prange(m, nogil=True, num_threads=num_threads, schedule="static"):
        o[t] = sqrt(_sqdist(y, a[t], y, b[t], p))
    return out


def loo_log_kernel_sums(const double[:, ::1] x, double h, int num_threads=1):
    cdef Py_ssize_t n = x.shape[0], p = x.shape[1], i, j
    cdef double c = 1.0 / (2.0 * h * h), mx, acc, e
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    for i in prange(n, nogil=True, num_threads=num_threads, schedule="static"):
        mx = -INFINITY
        for j in range(n):
            if j != i:
                e = -c * _sqdist(x, i, x, j, p)
                if e > mx:
                    mx = e
        acc = 0.0
        for j in range(n):
            if j != i:
                acc = acc + exp(-c * _sqdist(x, i, x, j, p) - mx)
        o[i] = mx + log(acc)
    return out


def project_simplex(const double[::1] v):
    cdef Py_ssize_t n = v.shape[0], i, rho = 0
    cdef double css = 0.0, theta = 0.0, t
    u_arr = np.sort(np.asarray(v), kind="stable")[::-1].copy()
    cdef double[::1] u = u_arr
    for i in range(n):
        css = css + u[i]
        t = (css - 1.0) / (i + 1)
        if u[i] - t > 0.0:
            rho = i
            theta = t
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(n):
        t = v[i] - theta
        o[i] = t if t > 0.0 else 0.0
    return out, theta


def chol_rank1(const double[:, ::1] chol, const double[::1] v, double c):
    """Lower Cholesky factor of L L^T + c v v^T (c may be negative)."""
    cdef Py_ssize_t p = chol.shape[0], k, i
    cdef double sign = 1.0 if c >= 0 else -1.0
    cdef double scale = sqrt(c if c >= 0 else -c), r, cc, s, lkk
    out = np.array(chol, dtype=np.float64, copy=True)
    xv = np.asarray(v, dtype=np.float64) * scale
    cdef double[:, ::1] L = out
    cdef double[::1] x = xv
    for k in range(p):
        lkk = L[k, k]
        r = lkk * lkk + sign * x[k] * x[k]
        if r <= 0.0:
            raise ValueError("rank-one downdate lost positive definiteness")
        r = sqrt(r)
        cc = r / lkk
        s = x[k] / lkk
        L[k, k] = r
        for i in range(k + 1, p):
            L[i, k] = (L[i, k] + sign * s * x[i]) / cc
            x[i] = cc * x[i] - s * L[i, k]
    return out
