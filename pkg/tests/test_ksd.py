import numpy as np
import pytest
from conftest import central_gradient, grid_minimizer, rel_err

from bbis.errors import InvalidInputError, NumericalError
from bbis.ksd import (
    imq_grad_x,
    imq_grad_y,
    imq_kernel,
    imq_trace_cross_hessian,
    ksd_weights,
    median_heuristic,
    stein_kernel,
    stein_kernel_matrix,
)


def fd_trace_cross_hessian(x, y, ell, h=1e-4):
    """sum_a d^2 k / dx_a dy_a by mixed central differences of the kernel itself."""
    total = 0.0
    for a in range(x.size):
        e = np.zeros_like(x)
        e[a] = h
        total += (
            imq_kernel(x + e, y + e, ell) - imq_kernel(x + e, y - e, ell)
            - imq_kernel(x - e, y + e, ell) + imq_kernel(x - e, y - e, ell)
        ) / (4 * h * h)
    return total


def std_normal_score(x):
    return -np.asarray(x, float)


class TestMedianHeuristic:
    @pytest.mark.parametrize(
        "x, expected",
        [([[0.0, 0.0], [3.0, 0.0]], 3.0), ([[0.0], [1.0], [3.0]], 2.0), ([[0.0], [1.0], [2.0], [4.0]], 2.0)],
    )
    def test_examples(self, x, expected):
        assert median_heuristic(np.array(x)) == expected

    def test_degenerate(self):
        with pytest.raises(NumericalError, match="degenerate sample set"):
            median_heuristic(np.ones((4, 2)))

    def test_uses_raw_euclidean_distance(self, rng):
        x = rng.standard_normal((9, 2)) * [1.0, 100.0]
        d = [np.linalg.norm(a - b) for i, a in enumerate(x) for b in x[i + 1:]]
        assert median_heuristic(x) == pytest.approx(np.median(d), rel=1e-14)


class TestBaseKernelDerivatives:
    def test_gradients_match_finite_differences(self, rng):
        for _ in range(100):
            p = rng.integers(1, 6)
            x, y = rng.standard_normal(p), rng.standard_normal(p)
            ell = rng.uniform(0.3, 3.0)
            gx = central_gradient(lambda v: imq_kernel(v, y, ell), x)
            gy = central_gradient(lambda v: imq_kernel(x, v, ell), y)
            assert rel_err(imq_grad_x(x, y, ell), gx) < 1e-5
            assert rel_err(imq_grad_y(x, y, ell), gy) < 1e-5

    def test_trace_matches_mixed_finite_differences(self, rng):
        for _ in range(100):
            p = rng.integers(1, 6)
            x, y = rng.standard_normal(p), rng.standard_normal(p)
            ell = rng.uniform(0.3, 3.0)
            assert rel_err(imq_trace_cross_hessian(x, y, ell), fd_trace_cross_hessian(x, y, ell)) < 1e-5


class TestSteinMatrix:
    def test_diagonal_hand_value(self):
        K = stein_kernel_matrix(np.array([[0.0]]), np.array([[0.0]]), 1.0)
        assert K.entries[0, 0] == 1.0

    def test_zero_score_reduces_to_trace(self, rng):
        x = rng.standard_normal((6, 2))
        K = stein_kernel_matrix(x, np.zeros_like(x), 1.3).entries
        ref = np.array([[imq_trace_cross_hessian(a, b, 1.3) for b in x] for a in x])
        np.testing.assert_allclose(K, ref, rtol=1e-12, atol=1e-14)

    def test_matches_entrywise_reference(self, rng):
        x = rng.standard_normal((8, 3))
        s = rng.standard_normal((8, 3))
        K = stein_kernel_matrix(x, s, 0.8).entries
        ref = np.array([[stein_kernel(x[i], x[j], s[i], s[j], 0.8) for j in range(8)] for i in range(8)])
        np.testing.assert_allclose(K, ref, rtol=1e-12, atol=1e-14)

    def test_symmetric_psd(self, rng):
        for _ in range(10):
            n, p = rng.integers(2, 51), rng.integers(1, 5)
            x = rng.standard_normal((n, p))
            K = stein_kernel_matrix(x, -x, median_heuristic(x)).entries
            np.testing.assert_allclose(K, K.T, atol=1e-10)
            ev = np.linalg.eigvalsh(K)
            assert ev.min() >= -1e-8 * ev.max()
            w = rng.dirichlet(np.ones(n))
            assert w @ K @ w >= -1e-8

    def test_dimension_mismatch(self, rng):
        with pytest.raises(InvalidInputError):
            stein_kernel_matrix(rng.standard_normal((4, 2)), rng.standard_normal((4, 3)), 1.0)

    def test_bad_bandwidth(self, rng):
        x = rng.standard_normal((4, 2))
        with pytest.raises(InvalidInputError):
            stein_kernel_matrix(x, -x, 0.0)


class TestKsdWeights:
    def test_single_point(self):
        np.testing.assert_array_equal(ksd_weights(np.array([[1.0]]), std_normal_score).weights, [1.0])

    def test_symmetric_pair(self):
        res = ksd_weights(np.array([[-0.8], [0.8]]), std_normal_score)
        np.testing.assert_allclose(res.weights, [0.5, 0.5], atol=1e-8)

    def test_three_point_grid_oracle(self):
        x = np.array([[-1.2], [0.1], [0.9]])
        K = stein_kernel_matrix(x, -x, median_heuristic(x)).entries
        w_grid, _ = grid_minimizer(K)
        np.testing.assert_allclose(ksd_weights(x, std_normal_score).weights, w_grid, atol=2e-3)

    def test_permutation_equivariance(self, rng):
        x = rng.standard_normal((12, 2))
        perm = rng.permutation(12)
        a = ksd_weights(x, std_normal_score).weights
        b = ksd_weights(x[perm], std_normal_score).weights
        np.testing.assert_allclose(b, a[perm], atol=1e-10)

    def test_corrects_shifted_proposal(self, rng):
        # samples from N(1, 1) reweighted toward N(0, 1)
        x = rng.normal(1.0, 1.0, size=(200, 1))
        w = ksd_weights(x, std_normal_score).weights
        assert abs(w @ x[:, 0]) < abs(x.mean()) / 2
