"""Sample generators: robust adaptive Metropolis, a Gibbs sampler for the
calibration problem, and prior importance sampling for its ground truth."""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from ._backend import kernels
from .errors import InvalidInputError
from .metrics import WeightedSampleSet
from .targets import CalibrationProblem, TargetBundle

TARGET_ACCEPT = 0.234
DECAY = 2.0 / 3.0


@dataclass
class ChainRecord:
    """Everything one chain proposed and accepted, in order.

    Row 0 is the initial state, recorded as an accepted proposal. For ``i >= 1``
    ``accepted[i]`` equals ``proposals[i]`` when ``accept_flags[i]`` and
    ``accepted[i - 1]`` otherwise.
    """

    proposals: np.ndarray
    accepted: np.ndarray
    accept_flags: np.ndarray
    log_gamma_values: np.ndarray
    seed: int
    rho_probabilities: Optional[np.ndarray] = None

    @property
    def acceptance_rate(self):
        return float(np.mean(self.accept_flags[1:])) if self.accept_flags.size > 1 else 1.0


def replicate_seed(seed, index, *extra):
    """Independent integer seed for replicate ``index`` of a run seeded by ``seed``.

    ``extra`` integers (e.g. a grid position) further separate the streams.
    """
    entropy = [int(seed), int(index), *(int(e) for e in extra)]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint32)[0])


def ram_chain(target: TargetBundle, n: int, seed: int, init=None, initial_shape=None,
              adapt=True, target_accept=TARGET_ACCEPT) -> ChainRecord:
    """Robust adaptive Metropolis.

    Proposals are ``y = x + S u`` with ``u ~ N(0, I)``. After step ``i`` the
    shape factor is updated so that

        S S^T <- S (I + eta_i (alpha_i - target_accept) u u^T / |u|^2) S^T,

    with ``eta_i = min(1, p i^{-2/3})``, via a rank-one Cholesky update.

    Parameters
    ----------
    init : array_like, optional
        Initial state; defaults to a seeded standard normal draw.
    initial_shape : array_like, optional
        Initial lower-triangular ``S`` (or a scalar multiple of the identity);
        defaults to the identity.
    """
    if n < 1:
        raise InvalidInputError("chain length must be at least 1")
    p = target.dim
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(p) if init is None else np.asarray(init, dtype=float).copy()
    if initial_shape is None:
        S = np.eye(p)
    elif np.ndim(initial_shape) == 0:
        S = float(initial_shape) * np.eye(p)
    else:
        S = np.array(initial_shape, dtype=float)
    lg_x = target.log_density(x)
    if not np.isfinite(lg_x):
        raise InvalidInputError("invalid initialization: log density is not finite at the initial state")

    proposals = np.empty((n, p))
    accepted = np.empty((n, p))
    flags = np.zeros(n, dtype=bool)
    lgs = np.empty(n)
    proposals[0] = accepted[0] = x
    flags[0] = True
    lgs[0] = lg_x
    for i in range(1, n):
        u = rng.standard_normal(p)
        y = x + S @ u
        lg_y = target.log_density(y)
        alpha = float(np.exp(min(0.0, lg_y - lg_x))) if np.isfinite(lg_y) else 0.0
        if rng.uniform() < alpha:
            x, lg_x = y, lg_y
            flags[i] = True
        proposals[i] = y
        accepted[i] = x
        lgs[i] = lg_y
        if adapt:
            eta = min(1.0, p * i ** -DECAY)
            c = eta * (alpha - target_accept)
            v = S @ (u / np.linalg.norm(u))
            S = kernels.chol_rank1(np.ascontiguousarray(S), np.ascontiguousarray(v), c)
    return ChainRecord(proposals, accepted, flags, lgs, seed)


def gibbs_mixed_chain(problem: CalibrationProblem, n: int, seed: int, init=None, step=0.1) -> ChainRecord:
    """Metropolis-within-Gibbs over (x1, x2, rho).

    Each iteration makes one random-walk Metropolis move on (x1, x2) with
    N(0, step^2 I) increments given rho, then draws rho exactly from its
    conditional. ``init`` defaults to a seeded uniform draw over the prior.
    Records hold the (x1, x2) proposal together with the rho in force, the
    full state after the sweep, and the rho conditionals used.
    """
    if n < 1:
        raise InvalidInputError("chain length must be at least 1")
    rng = np.random.default_rng(seed)
    levels = np.asarray(problem.levels, dtype=float)
    if init is None:
        state = np.array([rng.uniform(), rng.uniform(), rng.choice(levels)])
    else:
        state = np.asarray(init, dtype=float).copy()
    lp = problem.target.log_density(state)
    if not np.isfinite(lp):
        raise InvalidInputError("invalid initialization: log posterior is not finite at the initial state")

    proposals = np.empty((n, 3))
    accepted = np.empty((n, 3))
    flags = np.zeros(n, dtype=bool)
    lgs = np.empty(n)
    probs = np.empty((n, levels.size))
    for i in range(n):
        prop = state.copy()
        prop[:2] = state[:2] + step * rng.standard_normal(2)
        lp_prop = problem.target.log_density(prop)
        alpha = float(np.exp(min(0.0, lp_prop - lp))) if np.isfinite(lp_prop) else 0.0
        if rng.uniform() < alpha:
            state, lp = prop, lp_prop
            flags[i] = True
        proposals[i] = prop
        lgs[i] = lp_prop
        pr = problem.rho_conditional(state[0], state[1])
        probs[i] = pr
        state = state.copy()
        state[2] = levels[rng.choice(levels.size, p=pr)]
        lp = problem.target.log_density(state)
        accepted[i] = state
    return ChainRecord(proposals, accepted, flags, lgs, seed, probs)


def self_normalized_is(problem: CalibrationProblem, M: int, seed: int) -> WeightedSampleSet:
    """Importance sampling from the prior; weights are the normalized likelihood."""
    if M < 1:
        raise InvalidInputError("M must be at least 1")
    rng = np.random.default_rng(seed)
    levels = np.asarray(problem.levels, dtype=float)
    theta = np.column_stack([rng.uniform(size=M), rng.uniform(size=M), levels[rng.integers(0, levels.size, size=M)]])
    # the prior is flat on its support, so log posterior - log prior = log posterior + const
    lw = problem.log_posterior(theta)
    if not np.any(np.isfinite(lw)):
        raise InvalidInputError("all importance weights are zero")
    w = np.exp(lw - logsumexp(lw))
    return WeightedSampleSet(theta, w / w.sum())
