"""Projection onto the probability simplex and projected gradient descent.

The solver minimizes ``w^T Q w`` over the simplex for a symmetric PSD ``Q``
available only through matrix-vector products.
"""

from dataclasses import dataclass, field
from typing import Callable, Literal, Optional

import numpy as np

from ._backend import kernels
from .errors import InvalidInputError, NumericalError

# step halvings before the solver declares the iterate stationary
_MAX_HALVINGS = 60


@dataclass(frozen=True)
class QPConfig:
    max_iters: int = 5000
    tol: float = 1e-8
    step_rule: Literal["fixed", "backtracking"] = "fixed"
    power_iters: int = 50

    def __post_init__(self):
        if self.max_iters < 1 or self.power_iters < 1:
            raise InvalidInputError("max_iters and power_iters must be positive")
        if not 0 < self.tol < 1:
            raise InvalidInputError("tol must lie in (0, 1)")
        if self.step_rule not in ("fixed", "backtracking"):
            raise InvalidInputError(f"unknown step rule {self.step_rule!r}")


@dataclass
class QPResult:
    weights: np.ndarray
    objective_trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    step_size: float = float("nan")

    @property
    def objective(self):
        return self.objective_trace[-1]


def project_to_simplex(v, return_threshold=False):
    """Euclidean projection of ``v`` onto the probability simplex.

    Uses the sorted-threshold construction: ``w = max(v - theta, 0)`` with
    ``theta`` chosen so that ``sum(w) == 1``.
    """
    v = np.ascontiguousarray(np.asarray(v, dtype=float).ravel())
    if v.size < 1:
        raise InvalidInputError("cannot project an empty vector")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("non-finite input to simplex projection")
    w, theta = kernels.project_simplex(v)
    return (w, theta) if return_threshold else w


def _centered(v):
    return v - v.mean()


def spectral_bound(apply_Q, n, iters=50):
    """Power-iteration estimate of the largest eigenvalue of ``P Q P``.

    ``P = I - 11^T/n`` projects onto the tangent space of the simplex, which is
    the only part of ``Q`` the projected iteration sees. The start vector is the
    centered row-sum vector ``P Q 1`` so the estimate is permutation equivariant.
    """
    if n < 2:
        return 0.0
    v = _centered(apply_Q(np.ones(n)))
    norm = np.linalg.norm(v)
    if norm == 0 or not np.isfinite(norm):
        v = _centered(np.cos(np.arange(n) * 1.7 + 0.3))
        norm = np.linalg.norm(v)
    v = v / norm
    lam = 0.0
    for _ in range(iters):
        u = _centered(apply_Q(v))
        lam = float(v @ u)
        nu = np.linalg.norm(u)
        if nu == 0 or not np.isfinite(nu):
            break
        v = u / nu
    return max(lam, 0.0)


def minimize_quadratic_on_simplex(apply_Q: Callable, n: int, w0: Optional[np.ndarray] = None,
                                  cfg: QPConfig = QPConfig()) -> QPResult:
    """Minimize ``w^T Q w`` over the simplex by projected gradient descent.

    With ``step_rule="fixed"`` the step is ``1 / (2 L)`` where ``L`` is the
    power-iteration bound of :func:`spectral_bound` inflated by 1%. A step that
    would increase the objective is halved until it does not, so the recorded
    objective trace is non-increasing. ``"backtracking"`` uses an Armijo-type
    sufficient-decrease test on the projected step instead.

    Iteration stops when the relative objective decrease drops below
    ``cfg.tol`` or after ``cfg.max_iters`` iterations.
    """
    if n < 1:
        raise InvalidInputError("n must be positive")
    w = np.full(n, 1.0 / n) if w0 is None else np.asarray(w0, dtype=float).copy()
    if w.shape != (n,):
        raise InvalidInputError(f"w0 has shape {w.shape}, expected ({n},)")
    Qw = np.asarray(apply_Q(w), dtype=float)
    f = float(w @ Qw)
    if not np.isfinite(f):
        raise NumericalError("numerical blow-up at iterate 0")
    trace = [f]
    if n == 1:
        return QPResult(np.ones(1), trace, 0, True, 0.0)

    lip = 2.0 * 1.01 * spectral_bound(apply_Q, n, cfg.power_iters)
    if lip <= 0:
        return QPResult(w, trace, 0, True, float("inf"))
    step = 1.0 / lip
    backtracking = cfg.step_rule == "backtracking"

    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        grad = 2.0 * Qw
        t = step
        for _ in range(_MAX_HALVINGS):
            w_new = project_to_simplex(w - t * grad)
            Qw_new = np.asarray(apply_Q(w_new), dtype=float)
            f_new = float(w_new @ Qw_new)
            if not np.isfinite(f_new):
                raise NumericalError(f"numerical blow-up at iterate {it}")
            if backtracking:
                d = w_new - w
                ok = f_new <= f + grad @ d + (d @ d) / (2.0 * t)
            else:
                ok = f_new <= f
            if ok:
                break
            t *= 0.5
        else:
            converged = True
            it -= 1
            break
        if backtracking:
            step = 2.0 * t
        if f_new > f:
            # Armijo accepted a step without strict decrease (flat region)
            converged = True
            it -= 1
            break
        rel = (f - f_new) / max(abs(f), np.finfo(float).tiny)
        w, Qw, f = w_new, Qw_new, f_new
        trace.append(f)
        if rel < cfg.tol:
            converged = True
            break
    return QPResult(w, trace, it, converged, step)
