"""Numpy/scipy implementations of the compiled kernels.

Used when :mod:`bbis._ckernels` is unavailable or when ``BBIS_BACKEND=python``.
Signatures match the compiled module; ``num_threads`` is accepted and ignored.
"""

import numpy as np
from scipy.spatial.distance import cdist, pdist
from scipy.special import logsumexp

# rows per block when materializing (block, m) distance slabs
_BLOCK = 256


def sq_dists(z, num_threads=1):
    out = cdist(z, z, "sqeuclidean")
    np.fill_diagonal(out, 0.0)
    return out


def energy_log_matrix(log_gamma, sq, p, k, delta, num_threads=1):
    c = 1.0 / (2.0 * p)
    out = -k * ((log_gamma[:, None] + log_gamma[None, :]) * c + 0.5 * np.log(sq + delta))
    return np.triu(out) + np.triu(out, 1).T


def stein_matrix(x, scores, ell, num_threads=1):
    p = x.shape[1]
    inv_l2 = 1.0 / (ell * ell)
    r2 = cdist(x, x, "sqeuclidean") * inv_l2
    b = 1.0 / np.sqrt(1.0 + r2)
    b3 = b**3
    xs = x @ scores.T
    d = np.diag(xs)
    # (x_i - x_j) . (s_i - s_j)
    proj = d[:, None] + d[None, :] - xs - xs.T
    out = b * (scores @ scores.T) + b3 * proj * inv_l2 + p * b3 * inv_l2 - 3.0 * r2 * inv_l2 * b3 * b * b
    return 0.5 * (out + out.T)


def row_distance_sums(x, y, num_threads=1):
    out = np.empty(x.shape[0])
    for start in range(0, x.shape[0], _BLOCK):
        stop = start + _BLOCK
        out[start:stop] = cdist(x[start:stop], y).sum(axis=1)
    return out


def weighted_self_distance(x, w, num_threads=1):
    if x.shape[0] < 2:
        return 0.0
    return float(w @ cdist(x, x) @ w)


def pair_distance_sum(y, num_threads=1):
    if y.shape[0] < 2:
        return 0.0
    return float(pdist(y).sum())


def sampled_pair_distances(y, a, b, num_threads=1):
    return np.sqrt(np.sum((y[a] - y[b]) ** 2, axis=1))


def loo_log_kernel_sums(x, h, num_threads=1):
    e = -cdist(x, x, "sqeuclidean") / (2.0 * h * h)
    np.fill_diagonal(e, -np.inf)
    return logsumexp(e, axis=1)


def project_simplex(v):
    u = np.sort(v, kind="stable")[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, v.size + 1)
    t = (css - 1.0) / idx
    rho = np.flatnonzero(u - t > 0)[-1]
    theta = t[rho]
    return np.maximum(v - theta, 0.0), float(theta)


def chol_rank1(chol, v, c):
    """Lower Cholesky factor of L L^T + c v v^T (c may be negative)."""
    L = np.array(chol, dtype=float, copy=True)
    x = np.asarray(v, dtype=float) * np.sqrt(abs(c))
    sign = 1.0 if c >= 0 else -1.0
    p = L.shape[0]
    for k in range(p):
        lkk = L[k, k]
        r = lkk * lkk + sign * x[k] * x[k]
        if r <= 0.0:
            raise ValueError("rank-one downdate lost positive definiteness")
        r = np.sqrt(r)
        cc = r / lkk
        s = x[k] / lkk
        L[k, k] = r
        if k + 1 < p:
            L[k + 1 :, k] = (L[k + 1 :, k] + sign * s * x[k + 1 :]) / cc
            x[k + 1 :] = cc * x[k + 1 :] - s * L[k + 1 :, k]
    return L
