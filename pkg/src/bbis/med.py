"""Minimum-energy importance weights.

Each pair of samples carries the energy

    R_ij = exp{-k [ (log g_i + log g_j) / (2p) + 0.5 log(d2_ij + delta) ]}

where ``g`` is the unnormalized target density and ``d2`` the squared
Mahalanobis distance between standardized samples. The weights minimize
``w^T R w`` over the simplex. Only the unnormalized log density is needed:
its normalizing constant rescales ``R`` and leaves the minimizer unchanged.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._backend import kernel_threads, kernels
from .core import DEFAULT_JITTER, as_samples, mahalanobis_metric, pairwise_sq_dist, standardize
from .errors import InvalidInputError
from .simplex import QPConfig, QPResult, minimize_quadratic_on_simplex


@dataclass(frozen=True)
class MedConfig:
    k: float = 1.0
    delta: float = 0.01
    qp: QPConfig = field(default_factory=QPConfig)
    filter_enabled: bool = True
    jitter: float = DEFAULT_JITTER

    def __post_init__(self):
        if not self.k > 0:
            raise InvalidInputError(f"k must be positive, got {self.k}")
        if not self.delta > 0:
            raise InvalidInputError(f"delta must be positive, got {self.delta}")


@dataclass(frozen=True)
class EnergyMatrix:
    """Log-space energy matrix, shifted so its largest entry is 0.

    ``log_entries + stabilizer`` recovers ``log R`` (up to the dropped
    normalizing constant of the target).
    """

    log_entries: np.ndarray
    stabilizer: float

    def matrix(self):
        return np.exp(self.log_entries)


class MedResult(NamedTuple):
    weights: np.ndarray
    qp: QPResult
    diagnostics: dict


def _check_log_gamma(log_gamma, allow_neg_inf):
    lg = np.asarray(log_gamma, dtype=float).ravel()
    if lg.size == 0:
        raise InvalidInputError("empty log-density vector")
    bad = np.isnan(lg) | (lg == np.inf)
    if not allow_neg_inf:
        bad |= ~np.isfinite(lg)
    if np.any(bad):
        raise InvalidInputError("non-finite log density (filter -inf entries before building the energy matrix)")
    return lg


def build_energy_matrix(log_gamma, sq_dists, p, cfg=MedConfig()):
    lg = np.ascontiguousarray(_check_log_gamma(log_gamma, allow_neg_inf=False))
    sq = np.ascontiguousarray(np.asarray(sq_dists, dtype=float))
    n = lg.size
    if sq.shape != (n, n):
        raise InvalidInputError(f"distance matrix has shape {sq.shape}, expected ({n}, {n})")
    if np.any(sq < 0) or not np.all(np.isfinite(sq)):
        raise InvalidInputError("squared distances must be finite and nonnegative")
    if not np.array_equal(sq, sq.T):
        raise InvalidInputError("squared distance matrix is not symmetric")
    log_r = kernels.energy_log_matrix(lg, sq, float(p), float(cfg.k), float(cfg.delta), kernel_threads())
    stabilizer = float(log_r.max())
    log_r -= stabilizer
    return EnergyMatrix(log_r, stabilizer)


def low_density_threshold(max_log_gamma, p, delta):
    """Cutoff below which samples are dropped before solving.

    Calibrated for standardized samples and k = 1.
    """
    return max_log_gamma - p * (delta ** -0.5 - ((20.0 * np.sqrt(p)) ** 2 + delta) ** -0.5) - 1.0


def low_density_filter(log_gamma, p, delta):
    """Indices of samples whose log density reaches the cutoff, and the cutoff.

    ``-inf`` entries are always excluded; the highest-density sample is
    always kept.
    """
    lg = _check_log_gamma(log_gamma, allow_neg_inf=True)
    finite = np.isfinite(lg)
    if not finite.any():
        raise InvalidInputError("all log densities are -inf")
    top = int(np.argmax(lg))
    nu = low_density_threshold(lg[top], p, delta)
    keep = finite & (lg >= nu)
    keep[top] = True
    return np.flatnonzero(keep), float(nu)


def med_weights(samples, log_gamma, cfg=MedConfig()) -> MedResult:
    """Minimum-energy importance weights for ``samples`` under a target.

    Parameters
    ----------
    samples : array_like, shape (n, p)
        Points to reweight, produced by any mechanism.
    log_gamma : array_like, shape (n,)
        Unnormalized target log density at each sample; ``-inf`` marks points
        outside the support and always receives weight 0.
    cfg : MedConfig

    Returns
    -------
    MedResult
        ``(weights, qp, diagnostics)``. Diagnostics hold the filter cutoff
        ``nu``, the active count, the matrix stabilizer and solver summary.

    Notes
    -----
    Standardization and the covariance estimate use every sample, before the
    low-density filter. The log densities are shifted by their maximum first,
    so adding a constant to ``log_gamma`` that is exactly representable
    leaves the output bit-for-bit unchanged.
    """
    x = as_samples(samples)
    n, p = x.shape
    lg = _check_log_gamma(log_gamma, allow_neg_inf=True)
    if lg.size != n:
        raise InvalidInputError(f"log_gamma has length {lg.size}, expected {n}")
    finite = np.isfinite(lg)
    if not finite.any():
        raise InvalidInputError("all log densities are -inf")
    lg = lg - lg[finite].max()

    diagnostics = {"n": n, "p": p, "k": cfg.k, "delta": cfg.delta, "filter_heuristic": cfg.k != 1}
    if n == 1:
        qp = QPResult(np.ones(1), [1.0], 0, True, 0.0)
        diagnostics.update(nu=None, active=1, stabilizer=0.0, jitter=None, iterations=0, objective=1.0,
                           uniform_objective=1.0, converged=True)
        return MedResult(np.ones(1), qp, diagnostics)

    _, z = standardize(x)
    metric = mahalanobis_metric(z, cfg.jitter)

    if cfg.filter_enabled:
        active, nu = low_density_filter(lg, p, cfg.delta)
    else:
        active, nu = np.flatnonzero(finite), None

    za = z[active]
    sq = pairwise_sq_dist(za, metric)
    energy = build_energy_matrix(lg[active], sq, p, cfg)
    R = energy.matrix()
    qp = minimize_quadratic_on_simplex(R.__matmul__, active.size, cfg=cfg.qp)

    w = np.zeros(n)
    w[active] = qp.weights
    diagnostics.update(
        nu=nu,
        active=int(active.size),
        stabilizer=energy.stabilizer,
        jitter=metric.jitter,
        iterations=qp.iterations,
        objective=qp.objective,
        uniform_objective=qp.objective_trace[0],
        converged=qp.converged,
    )
    return MedResult(w, qp, diagnostics)
