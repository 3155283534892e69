"""Importance weights from a leave-one-out Gaussian KDE of the proposal."""

import math

import numpy as np
from scipy.special import gammaln, logsumexp

from ._backend import kernel_threads, kernels
from .core import as_samples
from .errors import InvalidInputError, NumericalError


def rot_bandwidth_formula(sigma, n, p):
    """Rule-of-thumb bandwidth for a given spread, sample size and dimension."""
    log_inner = math.log(p) + (p + 5) * math.log(2.0) + gammaln(p / 2 + 3) - math.log((2 * p + 1) * n)
    return sigma * math.exp(log_inner / (4 + p))


def rot_bandwidth(samples):
    """Rule-of-thumb bandwidth; the spread is the mean per-coordinate sample sd."""
    x = as_samples(samples)
    n, p = x.shape
    if n < 2:
        raise InvalidInputError(f"insufficient samples: need at least 2, got {n}")
    sigma = float(np.mean(x.std(axis=0, ddof=1)))
    if sigma <= 0:
        raise NumericalError("degenerate sample set: zero standard deviation")
    return rot_bandwidth_formula(sigma, n, p)


def loo_kde_log_density(samples, h):
    x = as_samples(samples)
    n, p = x.shape
    if n < 2:
        raise InvalidInputError("leave-one-out density needs at least 2 samples")
    if not h > 0:
        raise InvalidInputError(f"bandwidth must be positive, got {h}")
    sums = kernels.loo_log_kernel_sums(x, float(h), kernel_threads())
    return sums - math.log(n - 1) - 0.5 * p * math.log(2.0 * math.pi * h * h)


def loo_kde_density(samples, h):
    """Leave-one-out Gaussian KDE evaluated at each sample."""
    return np.exp(loo_kde_log_density(samples, h))


def kde_weights(samples, log_gamma, h=None):
    """Self-normalized weights ``g(x_i) / q(x_i)`` with ``q`` the LOO-KDE."""
    x = as_samples(samples)
    lg = np.asarray(log_gamma, dtype=float).ravel()
    if lg.size != x.shape[0]:
        raise InvalidInputError(f"log_gamma has length {lg.size}, expected {x.shape[0]}")
    if np.any(np.isnan(lg)) or np.any(lg == np.inf):
        raise InvalidInputError("log density must be finite or -inf")
    if not np.any(np.isfinite(lg)):
        raise InvalidInputError("all log densities are -inf")
    if h is None:
        h = rot_bandwidth(x)
    lg = lg - lg[np.isfinite(lg)].max()
    log_ratio = lg - loo_kde_log_density(x, h)
    return np.exp(log_ratio - logsumexp(log_ratio))
