import numpy as np
import pytest
from conftest import central_gradient, grid_minimizer, random_psd, rel_err
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bbis.errors import InvalidInputError, NumericalError
from bbis.simplex import QPConfig, minimize_quadratic_on_simplex, project_to_simplex, spectral_bound

vectors = arrays(float, st.integers(1, 10), elements=st.floats(-50, 50, allow_nan=False))


def kkt_violation(v, w, theta):
    """Largest violation of the projection optimality conditions."""
    pos = w > 0
    return max(
        abs(w.sum() - 1.0),
        float(np.max(np.abs(v[pos] - theta - w[pos]), initial=0.0)),
        float(np.max(v[~pos] - theta, initial=-np.inf)) if (~pos).any() else 0.0,
        float(-w.min()),
    )


class TestProjection:
    @pytest.mark.parametrize(
        "v, expected",
        [
            ([0.5, 0.5], [0.5, 0.5]),
            ([0.3, 0.3], [0.5, 0.5]),
            ([0.2, -0.1, 0.4], [0.2 + 1 / 6, -0.1 + 1 / 6, 0.4 + 1 / 6]),
            ([2.0, 1.0], [1.0, 0.0]),
        ],
    )
    def test_examples(self, v, expected):
        np.testing.assert_allclose(project_to_simplex(v), expected, atol=1e-12)

    def test_thresholds(self):
        _, theta = project_to_simplex([0.2, -0.1, 0.4], return_threshold=True)
        np.testing.assert_allclose(theta, -1 / 6)
        _, theta = project_to_simplex([2.0, 1.0], return_threshold=True)
        np.testing.assert_allclose(theta, 1.0)

    @settings(max_examples=200, deadline=None)
    @given(vectors)
    def test_kkt(self, v):
        w, theta = project_to_simplex(v, return_threshold=True)
        assert kkt_violation(v, w, theta) <= 1e-10

    @settings(max_examples=100, deadline=None)
    @given(vectors)
    def test_idempotent(self, v):
        w = project_to_simplex(v)
        np.testing.assert_allclose(project_to_simplex(w), w, atol=1e-12)

    def test_closest_point_against_random_feasible(self, rng):
        v = rng.standard_normal(6)
        w = project_to_simplex(v)
        others = rng.dirichlet(np.ones(6), size=2000)
        assert np.sum((w - v) ** 2) <= np.min(np.sum((others - v) ** 2, axis=1)) + 1e-12

    def test_ties_are_deterministic(self):
        w = project_to_simplex([1.0, 1.0, 1.0, 0.0])
        np.testing.assert_allclose(w, [1 / 3, 1 / 3, 1 / 3, 0.0])

    @pytest.mark.parametrize("v", [[], [np.nan, 1.0], [np.inf]])
    def test_invalid(self, v):
        with pytest.raises(InvalidInputError):
            project_to_simplex(v)


class TestConfig:
    @pytest.mark.parametrize("kw", [{"max_iters": 0}, {"tol": 0.0}, {"tol": 1.0}, {"step_rule": "newton"}, {"power_iters": 0}])
    def test_invalid(self, kw):
        with pytest.raises(InvalidInputError):
            QPConfig(**kw)


class TestSolver:
    def test_identity(self):
        res = minimize_quadratic_on_simplex(lambda w: w, 3, w0=np.array([0.7, 0.2, 0.1]))
        np.testing.assert_allclose(res.weights, [1 / 3] * 3, atol=1e-6)
        np.testing.assert_allclose(res.objective, 1 / 3, atol=1e-10)

    def test_diagonal_analytic(self):
        Q = np.diag([1.0, 100.0])
        res = minimize_quadratic_on_simplex(Q.__matmul__, 2, w0=np.array([0.5, 0.5]))
        np.testing.assert_allclose(res.weights, [100 / 101, 1 / 101], atol=1e-6)
        np.testing.assert_allclose(res.objective, 100 / 101, rtol=1e-8)

    @pytest.mark.parametrize("step_rule", ["fixed", "backtracking"])
    def test_grid_oracle(self, rng, step_rule):
        for _ in range(5):
            Q = random_psd(rng, 3)
            w_grid, f_grid = grid_minimizer(Q)
            res = minimize_quadratic_on_simplex(Q.__matmul__, 3, cfg=QPConfig(step_rule=step_rule))
            assert res.objective <= f_grid + 1e-6
            np.testing.assert_allclose(res.weights, w_grid, atol=2e-3)

    @pytest.mark.parametrize("step_rule", ["fixed", "backtracking"])
    def test_trace_non_increasing_and_feasible(self, rng, step_rule):
        for n in (2, 5, 20, 60):
            A = rng.standard_normal((n, n + 3))
            Q = A @ A.T
            res = minimize_quadratic_on_simplex(Q.__matmul__, n, cfg=QPConfig(step_rule=step_rule))
            tr = np.asarray(res.objective_trace)
            assert np.all(np.diff(tr) <= 1e-12)
            assert res.objective <= tr[0]
            assert np.all(res.weights >= 0)
            assert abs(res.weights.sum() - 1) <= 1e-10

    def test_never_worse_than_start(self, rng):
        Q = random_psd(rng, 8, cond=1e4)
        w0 = rng.dirichlet(np.ones(8))
        res = minimize_quadratic_on_simplex(Q.__matmul__, 8, w0=w0, cfg=QPConfig(max_iters=3))
        assert res.objective <= w0 @ Q @ w0
        assert res.iterations <= 3

    def test_trace_length_matches_iterations(self, rng):
        for cfg in (QPConfig(), QPConfig(max_iters=4), QPConfig(step_rule="backtracking")):
            Q = random_psd(rng, 10, cond=1e3)
            res = minimize_quadratic_on_simplex(Q.__matmul__, 10, cfg=cfg)
            assert res.iterations == len(res.objective_trace) - 1
        assert minimize_quadratic_on_simplex(lambda w: w, 4).converged

    def test_gradient_matches_finite_differences(self, rng):
        for n in (2, 7, 20):
            Q = random_psd(rng, n)
            w = rng.dirichlet(np.ones(n))
            fd = central_gradient(lambda v: v @ Q @ v, w, h=1e-6)
            assert rel_err(2 * Q @ w, fd) < 1e-6

    def test_single_point(self):
        res = minimize_quadratic_on_simplex(lambda w: 3.0 * w, 1)
        np.testing.assert_array_equal(res.weights, [1.0])

    def test_empty(self):
        with pytest.raises(InvalidInputError):
            minimize_quadratic_on_simplex(lambda w: w, 0)

    def test_blow_up(self):
        with pytest.raises(NumericalError, match="numerical blow-up"):
            minimize_quadratic_on_simplex(lambda w: np.full_like(w, np.inf), 3)

    def test_spectral_bound_matches_centered_spectrum(self, rng):
        Q = random_psd(rng, 6)
        P = np.eye(6) - 1 / 6
        lam = np.linalg.eigvalsh(P @ Q @ P).max()
        np.testing.assert_allclose(spectral_bound(Q.__matmul__, 6, iters=500), lam, rtol=1e-6)

    def test_permutation_equivariance(self, rng):
        Q = random_psd(rng, 5)
        perm = rng.permutation(5)
        a = minimize_quadratic_on_simplex(Q.__matmul__, 5).weights
        Qp = Q[np.ix_(perm, perm)]
        b = minimize_quadratic_on_simplex(Qp.__matmul__, 5).weights
        np.testing.assert_allclose(b, a[perm], atol=1e-10)
