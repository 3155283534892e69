"""Sample containers, standardization and Mahalanobis distances.

Conventions
-----------
* Standardization uses the population standard deviation (divide by n).
* The Mahalanobis covariance uses the unbiased sample covariance (divide by n - 1).
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ._backend import kernel_threads, kernels
from .errors import InvalidInputError, NumericalError

DEFAULT_JITTER = 1e-10
MAX_JITTER = 1e-2
# columns whose standard deviation falls below this get scale 1
_DEGENERATE_SD = 1e-12


def as_samples(x, name="samples"):
    """Return ``x`` as a finite float array of shape (n, p).

    One-dimensional input is read as n samples of a scalar.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidInputError(f"{name} must be a non-empty (n, p) array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"non-finite input in {name}")
    return np.ascontiguousarray(arr)


def as_weights(w, n=None):
    """Validate a probability vector (nonnegative, sums to one within 1e-10)."""
    w = np.asarray(w, dtype=float).ravel()
    if n is not None and w.size != n:
        raise InvalidInputError(f"weights have length {w.size}, expected {n}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InvalidInputError("weights must be finite and nonnegative")
    if abs(w.sum() - 1.0) > 1e-10:
        raise InvalidInputError(f"weights sum to {w.sum()!r}, not 1")
    return w


@dataclass(frozen=True)
class StandardizationTransform:
    means: np.ndarray
    scales: np.ndarray

    def apply(self, x):
        return (np.asarray(x, dtype=float) - self.means) / self.scales

    def inverse(self, z):
        return np.asarray(z, dtype=float) * self.scales + self.means


def standardize(samples):
    """Center each column and scale it to unit (population) variance.

    Returns
    -------
    transform : StandardizationTransform
    z : ndarray, shape (n, p)
    """
    x = as_samples(samples)
    if x.shape[0] < 2:
        raise InvalidInputError(f"insufficient samples: need at least 2, got {x.shape[0]}")
    means = x.mean(axis=0)
    sd = x.std(axis=0)
    scales = np.where(sd < _DEGENERATE_SD, 1.0, sd)
    transform = StandardizationTransform(means, scales)
    return transform, transform.apply(x)


@dataclass(frozen=True)
class MahalanobisMetric:
    """Quadratic-form metric ``(x - y)^T Sigma^{-1} (x - y)``.

    ``cholesky`` is the lower factor of ``covariance``; ``jitter`` is the
    diagonal loading that was needed to factorize it.
    """

    covariance: np.ndarray
    cholesky: np.ndarray
    jitter: float

    @property
    def dim(self):
        return self.covariance.shape[0]

    def whiten(self, x):
        """Map rows of ``x`` to coordinates where the metric is Euclidean."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.ascontiguousarray(linalg.solve_triangular(self.cholesky, x.T, lower=True).T)

    def __call__(self, x, y):
        z = self.whiten(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
        return float(np.sum(z * z))


def mahalanobis_metric(samples, jitter=DEFAULT_JITTER):
    """Estimate the sample covariance and factorize it.

    When the Cholesky factorization fails the diagonal jitter is escalated by
    a factor of 10 (starting from ``DEFAULT_JITTER`` if ``jitter`` is 0) until
    it succeeds or exceeds ``MAX_JITTER``.
    """
    x = as_samples(samples)
    n, p = x.shape
    if n < 2:
        raise InvalidInputError(f"insufficient samples: need at least 2, got {n}")
    if jitter < 0:
        raise InvalidInputError("jitter must be nonnegative")
    cov = np.atleast_2d(np.cov(x, rowvar=False, ddof=1))
    cov = 0.5 * (cov + cov.T)
    eye = np.eye(p)
    j = float(jitter)
    while True:
        loaded = cov + j * eye
        try:
            chol = np.linalg.cholesky(loaded)
            if np.all(np.diag(chol) > 0):
                return MahalanobisMetric(loaded, chol, j)
        except np.linalg.LinAlgError:
            pass
        j = max(10.0 * j, DEFAULT_JITTER)
        if j > MAX_JITTER:
            raise NumericalError("degenerate covariance: not factorizable with jitter up to 1e-2")


def pairwise_sq_dist(samples, metric):
    """All pairwise squared Mahalanobis distances, shape (n, n)."""
    x = as_samples(samples)
    if x.shape[1] != metric.dim:
        raise InvalidInputError(f"metric dimension {metric.dim} does not match samples dimension {x.shape[1]}")
    return kernels.sq_dists(metric.whiten(x), kernel_threads())
