"""
Tests for the features module.
"""

import numpy as np
import pytest


class TestFeatureMap:
    """Tests for building and applying random feature maps."""

    def test_same_seed_same_map(self):
        """Equal seeds give identical weights."""
        from features import build_feature_map
        a = build_feature_map(3, 8, seed=5)
        b = build_feature_map(3, 8, seed=5)
        assert np.array_equal(a.hidden_weights, b.hidden_weights)
        assert np.array_equal(a.hidden_bias, b.hidden_bias)

    def test_default_scale(self):
        """Weight scale defaults to 1/sqrt(d)."""
        from features import build_feature_map
        fm = build_feature_map(4, 6, seed=0)
        assert fm.weight_scale == pytest.approx(0.5)

    def test_output_dim_with_constant(self):
        """The constant feature adds one column."""
        from features import build_feature_map, featurize
        fm = build_feature_map(2, 5, seed=1, include_constant=True)
        U = featurize(fm, np.zeros((4, 2)))
        assert fm.output_dim == 6
        assert U.shape == (4, 6)
        assert np.all(U[:, -1] == 1.0)

    def test_features_are_relu(self):
        """Hidden features are non-negative."""
        from features import build_feature_map, featurize
        fm = build_feature_map(3, 20, seed=2)
        U = featurize(fm, np.random.default_rng(0).standard_normal((10, 3)))
        assert np.all(U >= 0.0)

    def test_wrong_input_width(self):
        """Inputs with the wrong number of columns are rejected."""
        from exceptions import DimensionError
        from features import build_feature_map, featurize
        fm = build_feature_map(3, 4, seed=0)
        with pytest.raises(DimensionError):
            featurize(fm, np.zeros((2, 2)))

    def test_to_dict_rebuilds(self):
        """to_dict carries what build_feature_map needs."""
        from features import build_feature_map
        fm = build_feature_map(2, 7, seed=9, include_constant=True)
        info = fm.to_dict()
        rebuilt = build_feature_map(
            info["d"], info["hidden_width"], seed=info["seed"],
            weight_scale=info["weight_scale"], include_constant=info["include_constant"],
        )
        assert np.array_equal(rebuilt.hidden_weights, fm.hidden_weights)
        assert info["p"] == 8


class TestRidgeSolve:
    """Tests for ridge_solve and the objective helpers."""

    def test_normal_equations(self, rng):
        """The ridge solution satisfies (U^T U + kappa I) theta = U^T Y."""
        from features import RidgeConfig, ridge_solve
        U = rng.standard_normal((12, 4))
        Y = rng.standard_normal(12)
        theta = ridge_solve(U, Y, RidgeConfig(kappa=0.7)).values
        lhs = (U.T @ U + 0.7 * np.eye(4)) @ theta
        assert np.allclose(lhs, U.T @ Y, rtol=1e-10, atol=1e-10)

    def test_minimizes_objective(self, rng):
        """Random perturbations never lower the penalized objective."""
        from features import RidgeConfig, objective, ridge_solve
        U = rng.standard_normal((10, 3))
        Y = rng.standard_normal(10)
        theta = ridge_solve(U, Y, RidgeConfig(kappa=1.5)).values
        best = objective(theta, U, Y, 1.5)
        for _ in range(20):
            assert objective(theta + 1e-3 * rng.standard_normal(3), U, Y, 1.5) >= best

    @pytest.mark.parametrize("shape", [(15, 4), (4, 9)])
    def test_norm_shrinks_with_kappa(self, rng, shape):
        """||theta(kappa)|| is non-increasing in kappa, from the kappa=0 solution down."""
        from features import RidgeConfig, ridge_solve
        U = rng.standard_normal(shape)
        Y = rng.standard_normal(shape[0])
        kappas = [0.0, 1e-3, 0.1, 0.5, 1.0, 5.0, 50.0]
        norms = [np.linalg.norm(ridge_solve(U, Y, RidgeConfig(kappa=k)).values) for k in kappas]
        assert np.all(np.diff(norms) <= 1e-12)
        assert norms[-1] < norms[0]

    def test_underdetermined_min_norm(self, rng):
        """kappa=0 with p > n interpolates with the minimum-norm solution."""
        from features import RidgeConfig, ridge_solve, sse
        U = rng.standard_normal((3, 6))
        Y = rng.standard_normal(3)
        result = ridge_solve(U, Y, RidgeConfig(kappa=0.0))
        assert result.min_norm
        assert sse(result, U, Y) < 1e-20
        assert np.allclose(result.values, np.linalg.pinv(U) @ Y)

    def test_full_rank_not_flagged(self, rng):
        """A tall full-rank design is not flagged min-norm."""
        from features import RidgeConfig, ridge_solve
        result = ridge_solve(rng.standard_normal((20, 3)), rng.standard_normal(20), RidgeConfig())
        assert not result.min_norm

    def test_negative_kappa_rejected(self):
        """Negative ridge coefficients are invalid."""
        from features import RidgeConfig
        with pytest.raises(ValueError):
            RidgeConfig(kappa=-1.0)

    def test_row_mismatch(self):
        """U and Y must have the same number of rows."""
        from exceptions import DimensionError
        from features import RidgeConfig, ridge_solve
        with pytest.raises(DimensionError):
            ridge_solve(np.ones((3, 2)), np.ones(4), RidgeConfig(kappa=1.0))

    def test_predict_shape_check(self):
        """predict rejects a theta of the wrong length."""
        from exceptions import DimensionError
        from features import predict
        with pytest.raises(DimensionError):
            predict(np.ones(3), np.ones((2, 4)))

    def test_objective_adds_penalty(self):
        """objective = SSE + kappa |theta|^2."""
        from features import objective, sse
        U = np.eye(2)
        Y = np.array([1.0, 0.0])
        theta = np.array([0.0, 2.0])
        assert sse(theta, U, Y) == pytest.approx(5.0)
        assert objective(theta, U, Y, 0.5) == pytest.approx(7.0)
