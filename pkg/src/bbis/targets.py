"""Target distributions and discrete-variable encoding.

Every evaluator in a :class:`TargetBundle` is vectorized over rows: it takes an
(n, p) array (or a single p-vector) and returns n values, or an (n, p) array
for scores. Normalizing constants are dropped throughout.
"""

import csv
import warnings
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional, Sequence

import numpy as np
from scipy import linalg
from scipy.special import expit, logsumexp

from .errors import InvalidInputError
from .metrics import Moments


@dataclass
class TargetBundle:
    log_gamma: Callable[[np.ndarray], np.ndarray]
    dim: int
    score: Optional[Callable[[np.ndarray], np.ndarray]] = None
    sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None
    moments: Optional[Moments] = None
    name: str = "target"

    def log_density(self, x):
        x = np.asarray(x, dtype=float)
        out = self.log_gamma(np.atleast_2d(x))
        return float(out[0]) if x.ndim == 1 else out

    def sample(self, rng, size):
        if self.sampler is None:
            raise InvalidInputError(f"target {self.name!r} has no exact sampler")
        return self.sampler(rng, size)


def _rows(x, p):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != p:
        raise InvalidInputError(f"expected points of dimension {p}, got {x.shape[1]}")
    return x


def gaussian_target(p, tau=0.0):
    """Zero-mean Gaussian with covariance ``tau ** |i - j|``."""
    if p < 1:
        raise InvalidInputError("dimension must be at least 1")
    if not 0.0 <= tau < 1.0:
        raise InvalidInputError(f"tau must lie in [0, 1), got {tau}")
    idx = np.arange(p)
    cov = np.power(float(tau), np.abs(idx[:, None] - idx[None, :]))
    chol = np.linalg.cholesky(cov)
    cho = (chol, True)

    def log_gamma(x):
        x = _rows(x, p)
        return -0.5 * np.einsum("ij,ij->i", x, linalg.cho_solve(cho, x.T).T)

    def score(x):
        x = _rows(x, p)
        return -linalg.cho_solve(cho, x.T).T

    def sampler(rng, size):
        return rng.standard_normal((size, p)) @ chol.T

    moments = Moments(np.zeros(p), np.ones(p), 0.0)
    return TargetBundle(log_gamma, p, score, sampler, moments, name=f"gaussian(p={p}, tau={tau})")


def random_mixture_centers(K, p, rng, scale=None):
    """Centers drawn from N(0, scale^2 I); scale defaults to 3 for p = 2, else 1."""
    if scale is None:
        scale = 3.0 if p == 2 else 1.0
    return scale * rng.standard_normal((K, p))


def mixture_target(centers):
    """Equal-weight mixture of unit-covariance Gaussians at ``centers``."""
    mu = np.atleast_2d(np.asarray(centers, dtype=float))
    if mu.shape[0] < 1 or not np.all(np.isfinite(mu)):
        raise InvalidInputError("centers must be a finite (K, p) array with K >= 1")
    K, p = mu.shape

    def _logits(x):
        d = x[:, None, :] - mu[None, :, :]
        return -0.5 * np.sum(d * d, axis=2)

    def log_gamma(x):
        return logsumexp(_logits(_rows(x, p)), axis=1)

    def score(x):
        x = _rows(x, p)
        a = _logits(x)
        r = np.exp(a - logsumexp(a, axis=1, keepdims=True))
        return r @ mu - x

    def sampler(rng, size):
        return mu[rng.integers(0, K, size=size)] + rng.standard_normal((size, p))

    moments = Moments(
        mu.mean(axis=0),
        1.0 + np.mean(mu * mu, axis=0),
        float(np.mean(np.sin(mu.sum(axis=1))) * np.exp(-0.5 * p)),
    )
    return TargetBundle(log_gamma, p, score, sampler, moments, name=f"mixture(K={K}, p={p})")


def logistic_target(features, labels, prior_var=0.1):
    """Posterior of Bayesian logistic regression with an intercept.

    Coefficients are ordered (intercept, feature_1, ..., feature_d); the prior
    is N(0, prior_var I).
    """
    X = np.atleast_2d(np.asarray(features, dtype=float))
    y = np.asarray(labels, dtype=float).ravel()
    if X.shape[0] != y.size:
        raise InvalidInputError("features and labels disagree in length")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise InvalidInputError("labels must be -1 or 1")
    if not prior_var > 0:
        raise InvalidInputError("prior variance must be positive")
    design = np.hstack([np.ones((X.shape[0], 1)), X])
    yx = y[:, None] * design
    p = design.shape[1]

    def log_gamma(beta):
        beta = _rows(beta, p)
        margins = beta @ yx.T
        return -np.sum(np.logaddexp(0.0, -margins), axis=1) - np.sum(beta * beta, axis=1) / (2.0 * prior_var)

    def score(beta):
        beta = _rows(beta, p)
        return expit(-(beta @ yx.T)) @ yx - beta / prior_var

    return TargetBundle(log_gamma, p, score, None, None, name=f"logistic(N={X.shape[0]}, p={p})")


def synthetic_logistic_data(n_data, n_features, rng):
    """Features ~ N(0, I), coefficients ~ N(0, I), labels drawn from the model."""
    X = rng.standard_normal((n_data, n_features))
    beta = rng.standard_normal(n_features + 1)
    prob = expit(beta[0] + X @ beta[1:])
    labels = np.where(rng.uniform(size=n_data) < prob, 1.0, -1.0)
    return X, labels, beta


def load_logistic_csv(path):
    """Read a dataset with a header row, feature columns and a ``label`` column.

    Labels must be -1/1; 0/1 labels are mapped to -1/1 with a warning.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InvalidInputError(f"{path}: empty file") from None
        if "label" not in header:
            raise InvalidInputError(f"{path}: no 'label' column")
        rows = [r for r in reader if r]
    try:
        data = np.array(rows, dtype=float)
    except ValueError as exc:
        raise InvalidInputError(f"{path}: {exc}") from None
    li = header.index("label")
    labels = data[:, li]
    features = np.delete(data, li, axis=1)
    if np.all(np.isin(labels, (0.0, 1.0))) and np.any(labels == 0.0):
        warnings.warn("labels given as 0/1; mapping 0 to -1", stacklevel=2)
        labels = 2.0 * labels - 1.0
    return features, labels


# ---------------------------------------------------------------------------
# synthetic calibration problem with a discrete parameter

CALIBRATION_TRUTH = (0.719, 0.552, 3)
CALIBRATION_LEVELS = (0, 1, 2, 3)
DEFAULT_CALIBRATION_SEED = 0


def calibration_response(t, x1, x2, rho):
    """``x1 sin(2 pi (rho/7) t - pi) + x2 sin(2 pi (1 - rho/7) t - pi)``."""
    t = np.asarray(t, dtype=float)
    return x1 * np.sin(2 * np.pi * (rho / 7.0) * t - np.pi) + x2 * np.sin(2 * np.pi * (1 - rho / 7.0) * t - np.pi)


@dataclass
class CalibrationProblem:
    """Posterior over (x1, x2, rho) with x1, x2 in [0, 1] and rho in {0, 1, 2, 3}.

    ``target`` is 3-dimensional with rho stored as a float column and has no
    score. The log posterior is ``-(N/2) log SSE`` inside the prior support.
    """

    times: np.ndarray
    observations: np.ndarray
    truth: tuple = CALIBRATION_TRUTH
    levels: tuple = CALIBRATION_LEVELS
    target: TargetBundle = field(init=False)

    def __post_init__(self):
        self.target = TargetBundle(self.log_posterior, 3, name="calibration")

    def log_posterior(self, theta):
        theta = _rows(theta, 3)
        x1, x2, rho = theta[:, 0], theta[:, 1], theta[:, 2]
        inside = (
            (x1 >= 0) & (x1 <= 1) & (x2 >= 0) & (x2 <= 1)
            & np.isin(rho, np.asarray(self.levels, dtype=float))
        )
        out = np.full(theta.shape[0], -np.inf)
        if not inside.any():
            return out
        n_obs = self.times.size
        if n_obs == 0:
            out[inside] = 0.0
            return out
        th = theta[inside]
        pred = calibration_response(self.times[None, :], th[:, :1], th[:, 1:2], th[:, 2:3])
        sse = np.sum((self.observations[None, :] - pred) ** 2, axis=1)
        with np.errstate(divide="ignore"):
            out[inside] = -0.5 * n_obs * np.log(sse)
        return out

    def rho_conditional(self, x1, x2):
        """p(rho = k | y, x1, x2) for each level, normalized by log-sum-exp."""
        theta = np.array([[x1, x2, k] for k in self.levels], dtype=float)
        lp = self.log_posterior(theta)
        if not np.any(np.isfinite(lp)):
            raise InvalidInputError("continuous parameters outside the prior support")
        return np.exp(lp - logsumexp(lp))

    def conditional_target(self, rho):
        """2-D target over (x1, x2) with rho held fixed."""

        def log_gamma(x):
            x = _rows(x, 2)
            return self.log_posterior(np.column_stack([x, np.full(x.shape[0], float(rho))]))

        return TargetBundle(log_gamma, 2, name=f"calibration(rho={rho})")


def calibration_target(seed=DEFAULT_CALIBRATION_SEED, times=None, noise_sd=0.2):
    """Synthetic calibration data generated at the true parameters with seeded noise."""
    if times is None:
        times = np.linspace(0.0, 1.0, 26)
    times = np.asarray(times, dtype=float).ravel()
    x1, x2, rho = CALIBRATION_TRUTH
    rng = np.random.default_rng(seed)
    y = calibration_response(times, x1, x2, rho) + noise_sd * rng.standard_normal(times.size)
    return CalibrationProblem(times, y)


# ---------------------------------------------------------------------------
# discrete encoding


@dataclass(frozen=True)
class DiscreteSpec:
    column: int
    kind: Literal["ordinal", "nominal"]
    levels: Sequence

    def __post_init__(self):
        if self.kind not in ("ordinal", "nominal"):
            raise InvalidInputError(f"unknown discrete kind {self.kind!r}")
        if len(self.levels) < 2:
            raise InvalidInputError("a discrete variable needs at least 2 levels")


def helmert_contrasts(n_levels):
    """Helmert contrast matrix (levels x (levels - 1)) with unit-norm columns.

    Column j compares level j + 1 with the mean of the levels before it.
    """
    H = np.zeros((n_levels, n_levels - 1))
    for j in range(1, n_levels):
        H[:j, j - 1] = -1.0
        H[j, j - 1] = float(j)
    return H / np.linalg.norm(H, axis=0)


def _level_index(values, levels):
    lookup = {lv: i for i, lv in enumerate(levels)}
    out = np.empty(len(values), dtype=int)
    for r, v in enumerate(values):
        key = v
        if isinstance(v, (float, np.floating)) and float(v).is_integer():
            key = int(v)
        if key not in lookup and v not in lookup:
            raise InvalidInputError(f"unseen level {v!r} (declared levels {list(levels)})")
        out[r] = lookup[key] if key in lookup else lookup[v]
    return out


def encode_discrete(samples, specs):
    """Numerically encode discrete columns.

    Ordinal variables become their level index (one column), nominal variables
    with L levels become L - 1 unit-norm Helmert contrast columns, and all other
    columns pass through unchanged, in their original order.
    """
    data = np.asarray(samples, dtype=object)
    if data.ndim != 2:
        raise InvalidInputError("samples must be a 2-D table")
    by_col = {s.column: s for s in specs}
    blocks = []
    for c in range(data.shape[1]):
        col = data[:, c]
        spec = by_col.get(c)
        if spec is None:
            blocks.append(col.astype(float)[:, None])
            continue
        idx = _level_index(col, list(spec.levels))
        if spec.kind == "ordinal":
            blocks.append(idx.astype(float)[:, None])
        else:
            blocks.append(helmert_contrasts(len(spec.levels))[idx])
    return np.hstack(blocks)
