import numpy as np
import pytest
from conftest import grid_minimizer
from hypothesis import given, settings
from hypothesis import strategies as st

from bbis.core import mahalanobis_metric, pairwise_sq_dist, standardize
from bbis.errors import InvalidInputError
from bbis.med import (
    MedConfig,
    build_energy_matrix,
    low_density_filter,
    low_density_threshold,
    med_weights,
)


def energy_for(x, lg, cfg=MedConfig()):
    """Energy matrix on the full sample set via the public pipeline pieces."""
    x = np.atleast_2d(np.asarray(x, float))
    _, z = standardize(x)
    sq = pairwise_sq_dist(z, mahalanobis_metric(z, cfg.jitter))
    return build_energy_matrix(lg, sq, x.shape[1], cfg)


def dyadic_log_gamma(rng, n):
    """Log densities on a 2^-30 grid with magnitude < 64, so shifts by +-1000 are exact."""
    return np.round(rng.uniform(-60.0, 0.0, n) * 2.0**30) / 2.0**30


class TestConfig:
    @pytest.mark.parametrize("kw", [{"k": 0.0}, {"k": -1.0}, {"delta": 0.0}])
    def test_invalid(self, kw):
        with pytest.raises(InvalidInputError):
            MedConfig(**kw)


class TestEnergyMatrix:
    def test_scalar_example(self):
        em = build_energy_matrix([0.0, 0.0], [[0.0, 4.0], [4.0, 0.0]], p=1)
        R = np.exp(em.log_entries + em.stabilizer)
        np.testing.assert_allclose(R[0, 1], 4.01**-0.5, rtol=1e-14)
        np.testing.assert_allclose(np.diag(R), [10.0, 10.0], rtol=1e-14)
        assert em.log_entries.max() == 0.0
        assert np.all(em.matrix() <= 1.0) and np.all(em.matrix() > 0)

    def test_formula_matches_direct_evaluation(self, rng):
        n, p, k, delta = 6, 3, 1.7, 0.05
        lg = rng.normal(size=n)
        A = rng.standard_normal((n, p))
        sq = np.sum((A[:, None] - A[None]) ** 2, axis=2)
        em = build_energy_matrix(lg, sq, p, MedConfig(k=k, delta=delta))
        direct = -k * ((lg[:, None] + lg[None, :]) / (2 * p) + 0.5 * np.log(sq + delta))
        np.testing.assert_allclose(em.log_entries + em.stabilizer, direct, rtol=1e-13, atol=1e-13)

    def test_shift_is_absorbed_by_stabilizer(self, rng):
        lg = rng.normal(size=5)
        x = rng.standard_normal((5, 2))
        a = energy_for(x, lg)
        b = energy_for(x, lg + 3.0)
        np.testing.assert_allclose(b.stabilizer - a.stabilizer, -3.0 / 2, rtol=1e-12)
        np.testing.assert_allclose(a.log_entries, b.log_entries, atol=1e-12)

    def test_single_point(self):
        em = build_energy_matrix([2.0], [[0.0]], p=1)
        assert em.log_entries.shape == (1, 1)
        assert med_weights(np.array([[0.3]]), [2.0]).weights.tolist() == [1.0]

    def test_symmetric(self, rng):
        x = rng.standard_normal((20, 3))
        em = energy_for(x, -0.5 * np.sum(x * x, 1))
        np.testing.assert_array_equal(em.log_entries, em.log_entries.T)

    def test_psd_small_instances(self, rng):
        for _ in range(20):
            n, p = rng.integers(2, 51), rng.integers(1, 6)
            x = rng.standard_normal((n, p)) * rng.uniform(0.2, 3)
            ev = np.linalg.eigvalsh(energy_for(x, rng.normal(scale=3, size=n)).matrix())
            assert ev.min() >= -1e-8 * ev.max()

    @pytest.mark.parametrize(
        "lg, sq",
        [
            ([0.0, 0.0], [[0.0, 1.0], [2.0, 0.0]]),
            ([0.0, 0.0], [[0.0, -1.0], [-1.0, 0.0]]),
            ([0.0, np.inf], [[0.0, 1.0], [1.0, 0.0]]),
            ([0.0, -np.inf], [[0.0, 1.0], [1.0, 0.0]]),
            ([0.0, np.nan], [[0.0, 1.0], [1.0, 0.0]]),
            ([0.0], [[0.0, 1.0], [1.0, 0.0]]),
        ],
    )
    def test_invalid(self, lg, sq):
        with pytest.raises(InvalidInputError):
            build_energy_matrix(lg, sq, p=1)


class TestLowDensityFilter:
    def test_threshold_value(self):
        nu = low_density_threshold(0.0, 1, 0.01)
        np.testing.assert_allclose(nu, -(10 - 400.01**-0.5) - 1)
        assert round(-nu, 2) == 10.95

    def test_all_equal_kept(self):
        active, _ = low_density_filter(np.full(7, -3.0), 2, 0.01)
        np.testing.assert_array_equal(active, np.arange(7))

    def test_neg_inf_excluded(self):
        active, _ = low_density_filter([0.0, -np.inf, -1.0], 1, 0.01)
        np.testing.assert_array_equal(active, [0, 2])

    def test_cutoff(self):
        lg = np.array([0.0, -10.0, -11.0, -50.0])
        active, nu = low_density_filter(lg, 1, 0.01)
        np.testing.assert_array_equal(active, [0, 1])
        assert lg[2] < nu <= lg[1]

    def test_argmax_kept(self):
        active, _ = low_density_filter([-np.inf, 5.0], 1, 0.01)
        np.testing.assert_array_equal(active, [1])

    def test_empty(self):
        with pytest.raises(InvalidInputError):
            low_density_filter([], 1, 0.01)


class TestMedWeights:
    def test_symmetric_pair(self):
        res = med_weights(np.array([[-0.7], [0.7]]), [-0.245, -0.245])
        np.testing.assert_allclose(res.weights, [0.5, 0.5], atol=1e-8)

    def test_three_point_grid_oracle(self):
        x = np.array([[-1.0], [0.0], [1.0]])
        lg = -0.5 * x[:, 0] ** 2
        w_grid, _ = grid_minimizer(energy_for(x, lg).matrix())
        np.testing.assert_allclose(med_weights(x, lg).weights, w_grid, atol=2e-3)

    def test_centre_gets_more_weight(self):
        x = np.array([[-1.0], [0.0], [1.0]])
        w = med_weights(x, -0.5 * x[:, 0] ** 2).weights
        assert w[1] > w[0] and w[1] > w[2]
        np.testing.assert_allclose(w[0], w[2], rtol=1e-10)

    def test_filtered_weights_are_zero(self, rng):
        x = rng.standard_normal((40, 2))
        lg = -0.5 * np.sum(x * x, 1)
        lg[[3, 7]] = [-100.0, -np.inf]
        res = med_weights(x, lg)
        assert res.weights[3] == 0.0 and res.weights[7] == 0.0
        assert res.diagnostics["active"] == 38
        assert abs(res.weights.sum() - 1.0) <= 1e-10

    def test_filter_disabled_keeps_low_density(self, rng):
        x = rng.standard_normal((20, 2))
        lg = -0.5 * np.sum(x * x, 1)
        lg[0] = -100.0
        res = med_weights(x, lg, MedConfig(filter_enabled=False))
        assert res.diagnostics["active"] == 20
        assert res.diagnostics["nu"] is None

    def test_objective_not_worse_than_uniform(self, rng):
        x = rng.standard_normal((60, 3))
        res = med_weights(x, -0.5 * np.sum(x * x, 1))
        assert res.diagnostics["objective"] <= res.diagnostics["uniform_objective"]

    @pytest.mark.parametrize("c", [-1000.0, -1.0, 0.0, 0.5, 1000.0])
    def test_scale_invariance_bitwise(self, rng, c):
        x = rng.standard_normal((30, 2))
        lg = dyadic_log_gamma(rng, 30)
        np.testing.assert_array_equal(med_weights(x, lg + c).weights, med_weights(x, lg).weights)

    def test_scale_invariance_general_floats(self, rng):
        x = rng.standard_normal((30, 2))
        lg = -0.5 * np.sum(x * x, 1) + rng.normal(scale=1e-3, size=30)
        for c in (-1000.0, np.pi, 1000.0):
            np.testing.assert_allclose(med_weights(x, lg + c).weights, med_weights(x, lg).weights, atol=1e-9)

    def test_permutation_equivariance(self, rng):
        x = rng.standard_normal((25, 2))
        lg = -0.5 * np.sum(x * x, 1)
        perm = rng.permutation(25)
        np.testing.assert_allclose(med_weights(x[perm], lg[perm]).weights, med_weights(x, lg).weights[perm], atol=1e-12)

    def test_duplicates_allowed(self):
        x = np.array([[0.0], [0.0], [1.0], [2.0]])
        w = med_weights(x, -0.5 * x[:, 0] ** 2).weights
        np.testing.assert_allclose(w[0], w[1], rtol=1e-12)

    def test_diagnostics(self, rng):
        x = rng.standard_normal((10, 2))
        d = med_weights(x, -0.5 * np.sum(x * x, 1), MedConfig(k=3)).diagnostics
        assert d["filter_heuristic"] is True
        for key in ("nu", "active", "stabilizer", "iterations", "objective", "converged", "jitter"):
            assert key in d

    def test_length_mismatch(self, rng):
        with pytest.raises(InvalidInputError):
            med_weights(rng.standard_normal((5, 2)), np.zeros(4))

    def test_all_neg_inf(self, rng):
        with pytest.raises(InvalidInputError):
            med_weights(rng.standard_normal((5, 2)), np.full(5, -np.inf))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 25), st.integers(1, 4), st.integers(0, 2**32 - 1))
    def test_weights_on_simplex(self, n, p, seed):
        r = np.random.default_rng(seed)
        x = r.standard_normal((n, p))
        w = med_weights(x, r.normal(scale=2, size=n)).weights
        assert np.all(w >= 0)
        assert abs(w.sum() - 1.0) <= 1e-10
