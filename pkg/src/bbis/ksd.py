"""Stein importance weights.

The Stein kernel built on the inverse multiquadric base kernel
``k(x, y) = (1 + |x - y|^2 / l^2)^{-1/2}`` is

    k_pi(x, y) = s(x).s(y) k + s(x).grad_y k + s(y).grad_x k + tr(grad_x grad_y k)

with ``s`` the score of the target. Weights minimize ``w^T K_pi w`` over the
simplex.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.spatial.distance import pdist

from ._backend import kernel_threads, kernels
from .core import as_samples
from .errors import InvalidInputError, NumericalError
from .simplex import QPConfig, QPResult, minimize_quadratic_on_simplex


@dataclass(frozen=True)
class SteinMatrix:
    entries: np.ndarray
    bandwidth: float


class KsdResult(NamedTuple):
    weights: np.ndarray
    qp: QPResult
    bandwidth: float


def imq_kernel(x, y, ell):
    r2 = np.sum((np.asarray(x, float) - np.asarray(y, float)) ** 2) / ell**2
    return (1.0 + r2) ** -0.5


def imq_grad_x(x, y, ell):
    u = (np.asarray(x, float) - np.asarray(y, float)) / ell**2
    return -u * imq_kernel(x, y, ell) ** 3


def imq_grad_y(x, y, ell):
    return -imq_grad_x(x, y, ell)


def imq_trace_cross_hessian(x, y, ell):
    """``trace(grad_x grad_y k)``."""
    x = np.asarray(x, float)
    u = (x - np.asarray(y, float)) / ell**2
    b = imq_kernel(x, y, ell)
    return x.size / ell**2 * b**3 - 3.0 * (u @ u) * b**5


def stein_kernel(x, y, sx, sy, ell):
    """Single Stein-kernel entry; reference for :func:`stein_kernel_matrix`."""
    return (
        np.dot(sx, sy) * imq_kernel(x, y, ell)
        + np.dot(sx, imq_grad_y(x, y, ell))
        + np.dot(sy, imq_grad_x(x, y, ell))
        + imq_trace_cross_hessian(x, y, ell)
    )


def median_heuristic(samples):
    """Median of the pairwise Euclidean distances between samples."""
    x = as_samples(samples)
    if x.shape[0] < 2:
        raise InvalidInputError("median heuristic needs at least 2 samples")
    med = float(np.median(pdist(x)))
    if med <= 0:
        raise NumericalError("degenerate sample set: median pairwise distance is zero")
    return med


def stein_kernel_matrix(samples, scores, ell):
    x = as_samples(samples)
    s = np.ascontiguousarray(np.asarray(scores, dtype=float))
    if s.shape != x.shape:
        raise InvalidInputError(f"scores have shape {s.shape}, expected {x.shape}")
    if not np.all(np.isfinite(s)):
        raise NumericalError("score is not finite on the sample set")
    if not ell > 0:
        raise InvalidInputError("bandwidth must be positive")
    return SteinMatrix(kernels.stein_matrix(x, s, float(ell), kernel_threads()), float(ell))


def ksd_weights(samples, score, qp=QPConfig()) -> KsdResult:
    """Stein importance weights.

    ``score`` maps an (n, p) array to the (n, p) array of target scores.
    The bandwidth is the median heuristic on the raw samples.
    """
    x = as_samples(samples)
    n = x.shape[0]
    if n == 1:
        return KsdResult(np.ones(1), QPResult(np.ones(1), [0.0], 0, True, 0.0), float("nan"))
    ell = median_heuristic(x)
    K = stein_kernel_matrix(x, score(x), ell).entries
    res = minimize_quadratic_on_simplex(K.__matmul__, n, cfg=qp)
    return KsdResult(res.weights, res, ell)
