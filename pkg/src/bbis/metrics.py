"""Energy distance and moment errors for weighted sample sets."""

from dataclasses import dataclass
from typing import Literal, NamedTuple, Optional

import numpy as np

from ._backend import kernel_threads, kernels
from .core import as_samples, as_weights
from .errors import InvalidInputError

MAX_REFERENCE_PAIRS = 2_000_000


@dataclass(frozen=True)
class WeightedSampleSet:
    samples: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        x = as_samples(self.samples)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "weights", as_weights(self.weights, x.shape[0]))

    @classmethod
    def uniform(cls, samples):
        x = as_samples(samples)
        return cls(x, np.full(x.shape[0], 1.0 / x.shape[0]))


@dataclass(frozen=True)
class Moments:
    """Known target expectations of X, diag(X X^T) and sin(1^T X)."""

    mean: Optional[np.ndarray]
    second: Optional[np.ndarray]
    sin_sum: Optional[float]


class MomentErrors(NamedTuple):
    mean: float
    second: float
    sin_sum: float


def _reference(ref, dim):
    y = as_samples(ref, "reference")
    if y.shape[1] != dim:
        raise InvalidInputError(f"reference dimension {y.shape[1]} does not match samples dimension {dim}")
    return y


def energy_distance_simplified(ws: WeightedSampleSet, ref) -> float:
    """``(2/M) sum_i sum_m w_i |x_i - y_m| - sum_i sum_j w_i w_j |x_i - x_j|``.

    Drops the reference self-term, which does not depend on the weights.
    """
    y = _reference(ref, ws.samples.shape[1])
    threads = kernel_threads()
    cross = float(ws.weights @ kernels.row_distance_sums(ws.samples, y, threads)) / y.shape[0]
    self_term = kernels.weighted_self_distance(ws.samples, ws.weights, threads)
    return 2.0 * cross - self_term


def reference_pair_term(ref, estimator: Literal["v", "u"] = "v", max_pairs=MAX_REFERENCE_PAIRS, seed=0):
    """Estimate ``E|Y - Y'|`` from a reference sample.

    ``estimator="v"`` is the plug-in mean over all M^2 ordered pairs
    (diagonal included); ``"u"`` averages over distinct pairs only. When the
    number of distinct pairs exceeds ``max_pairs`` a seeded random subset of
    distinct pairs is used and the V form is obtained as ``U (M - 1) / M``.
    """
    y = as_samples(ref, "reference")
    m = y.shape[0]
    if m < 2:
        raise InvalidInputError("the reference set needs at least 2 points")
    if estimator not in ("u", "v"):
        raise InvalidInputError(f"unknown estimator {estimator!r}")
    n_pairs = m * (m - 1) // 2
    if n_pairs <= max_pairs:
        total = kernels.pair_distance_sum(y, kernel_threads())
        return total / n_pairs if estimator == "u" else 2.0 * total / (m * m)
    rng = np.random.default_rng(seed)
    a = rng.integers(0, m, size=max_pairs)
    b = rng.integers(0, m - 1, size=max_pairs)
    b = np.where(b >= a, b + 1, b)
    u = float(np.mean(kernels.sampled_pair_distances(y, a.astype(np.int64), b.astype(np.int64), kernel_threads())))
    return u if estimator == "u" else u * (m - 1) / m


def energy_distance_full(ws: WeightedSampleSet, ref, estimator: Literal["v", "u"] = "v",
                         max_pairs=MAX_REFERENCE_PAIRS, seed=0, pair_term=None) -> float:
    """Energy distance between the weighted set and the reference distribution.

    The default plug-in (``"v"``) estimator makes the distance of the
    uniformly weighted reference to itself exactly zero. ``pair_term`` may be
    passed to reuse a precomputed :func:`reference_pair_term`.
    """
    y = _reference(ref, ws.samples.shape[1])
    if y.shape[0] < 2:
        raise InvalidInputError("the reference set needs at least 2 points")
    if pair_term is None:
        pair_term = reference_pair_term(y, estimator, max_pairs, seed)
    return energy_distance_simplified(ws, y) - pair_term


def weighted_moment_errors(ws: WeightedSampleSet, truth: Moments) -> MomentErrors:
    """Squared errors of weighted estimates of E X, E diag(XX^T), E sin(1^T X).

    The first two are averaged over coordinates.
    """
    if truth is None or truth.mean is None or truth.second is None or truth.sin_sum is None:
        raise InvalidInputError("truth must provide mean, second moment and sin expectation")
    x, w = ws.samples, ws.weights
    p = x.shape[1]
    mean = np.asarray(truth.mean, dtype=float)
    second = np.asarray(truth.second, dtype=float)
    if mean.shape != (p,) or second.shape != (p,):
        raise InvalidInputError("truth moments do not match the sample dimension")
    e_mean = float(np.sum((w @ x - mean) ** 2) / p)
    e_second = float(np.sum((w @ (x * x) - second) ** 2) / p)
    e_sin = float((w @ np.sin(x.sum(axis=1)) - truth.sin_sum) ** 2)
    return MomentErrors(e_mean, e_second, e_sin)
