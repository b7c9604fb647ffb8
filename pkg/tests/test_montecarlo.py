"""
Tests for the montecarlo module.
"""

import numpy as np
import pytest


class TestModelParams:
    """Tests for ModelParams validation."""

    def test_v0_defaults_to_v_inf(self):
        from montecarlo import ModelParams
        assert ModelParams(v_inf=0.03).v0 == 0.03

    @pytest.mark.parametrize(
        "kwargs,name",
        [
            ({"correlation": 1.5}, "correlation"),
            ({"hurst": 0.7}, "hurst"),
            ({"hurst": 0.0}, "hurst"),
            ({"x0": 0.0}, "x0"),
            ({"v_inf": -0.1}, "v_inf"),
        ],
    )
    def test_invalid(self, kwargs, name):
        from exceptions import SimulationError
        from montecarlo import ModelParams
        with pytest.raises(SimulationError) as exc:
            ModelParams(**kwargs)
        assert exc.value.details["parameter"] == name

    def test_is_rough(self):
        from montecarlo import ModelParams
        assert ModelParams(hurst=0.1).is_rough
        assert not ModelParams().is_rough


class TestHeston:
    """Tests for simulate_heston."""

    def test_shapes_and_grid(self):
        from montecarlo import ModelParams, simulate_heston
        paths = simulate_heston(ModelParams(), d_assets=2, n_paths=4, M=9, T_mat=3.0, substeps=5, seed=1)
        assert paths.prices.shape == (4, 10, 2)
        assert paths.n_dates == 9
        assert paths.maturity == pytest.approx(3.0)
        assert np.allclose(paths.exercise_times, np.linspace(0.0, 3.0, 10))
        assert np.all(paths.prices[:, 0] == 100.0)
        assert np.all(paths.variance >= 0.0)

    def test_zero_volatility_is_deterministic_growth(self):
        """With v = 0 the price is x0 exp((r - delta) t) on every path."""
        from montecarlo import ModelParams, simulate_heston
        params = ModelParams(rate=0.05, dividend=0.1, v_inf=0.0, vol_of_vol=0.0)
        paths = simulate_heston(params, d_assets=3, n_paths=5, M=4, T_mat=2.0, substeps=7, seed=2)
        expected = 100.0 * np.exp(-0.05 * paths.exercise_times)
        assert np.allclose(paths.prices, expected[None, :, None], rtol=1e-12, atol=0)

    def test_stationary_variance_without_vol_of_vol(self):
        """v0 = v_inf with sigma = 0 keeps the variance constant."""
        from montecarlo import ModelParams, simulate_heston
        paths = simulate_heston(ModelParams(v_inf=0.02, vol_of_vol=0.0), 1, 3, 5, 1.0, seed=4)
        assert np.all(paths.variance == 0.02)

    def test_prefix_consistency(self):
        """The first paths do not depend on how many are simulated."""
        from montecarlo import ModelParams, simulate_heston
        small = simulate_heston(ModelParams(), 2, 5, 3, 1.0, seed=9, stream=2)
        large = simulate_heston(ModelParams(), 2, 12, 3, 1.0, seed=9, stream=2)
        assert np.array_equal(small.prices, large.prices[:5])

    def test_streams_differ(self):
        from montecarlo import ModelParams, simulate_heston
        a = simulate_heston(ModelParams(), 1, 3, 3, 1.0, seed=9, stream=0)
        b = simulate_heston(ModelParams(), 1, 3, 3, 1.0, seed=9, stream=1)
        assert not np.array_equal(a.prices, b.prices)

    def test_rough_params_rejected(self):
        from exceptions import SimulationError
        from montecarlo import ModelParams, simulate_heston
        with pytest.raises(SimulationError):
            simulate_heston(ModelParams(hurst=0.2), 1, 2, 2, 1.0)

    @pytest.mark.parametrize("kwargs", [{"n_paths": 0}, {"M": 0}, {"T_mat": 0.0}, {"d_assets": 0}])
    def test_bad_grid(self, kwargs):
        from exceptions import SimulationError
        from montecarlo import ModelParams, simulate_heston
        args = {"d_assets": 1, "n_paths": 2, "M": 2, "T_mat": 1.0}
        args.update(kwargs)
        with pytest.raises(SimulationError):
            simulate_heston(ModelParams(), **args)


class TestRoughHeston:
    """Tests for the Volterra scheme."""

    def test_half_hurst_routes_to_heston(self):
        """H = 1/2 gives bit-identical paths to the classical scheme."""
        from montecarlo import ModelParams, simulate_heston, simulate_rough_heston
        params = ModelParams(hurst=0.5)
        rough = simulate_rough_heston(params, 2, 4, 3, 1.0, fine_steps=30, seed=5)
        plain = simulate_heston(params, 2, 4, 3, 1.0, substeps=10, seed=5)
        assert np.array_equal(rough.prices, plain.prices)
        assert rough.model == "heston"

    def test_kernel_is_flat_at_half(self):
        from montecarlo import volterra_weights
        weights = volterra_weights(0.5, 6, 0.1)
        assert weights[0] == 0.0
        assert np.allclose(weights[1:], 1.0)

    def test_rough_paths(self):
        from montecarlo import ModelParams, simulate
        paths = simulate(ModelParams(hurst=0.1), 2, 3, 4, 1.0, fine_steps=40, seed=1)
        assert paths.model == "rough_heston"
        assert paths.prices.shape == (3, 5, 2)
        assert np.all(np.isfinite(paths.prices))
        assert np.all(paths.variance >= 0.0)

    def test_rough_stationary_variance(self):
        """sigma = 0 and v0 = v_inf leave the rough variance at v0."""
        from montecarlo import ModelParams, simulate_rough_heston
        paths = simulate_rough_heston(ModelParams(hurst=0.2, v_inf=0.01, vol_of_vol=0.0), 1, 2, 3, 1.0, fine_steps=12)
        assert np.all(paths.variance == 0.01)

    def test_fine_grid_too_coarse(self):
        from exceptions import SimulationError
        from montecarlo import ModelParams, simulate_rough_heston
        with pytest.raises(SimulationError):
            simulate_rough_heston(ModelParams(hurst=0.1), 1, 2, 10, 1.0, fine_steps=5)


class TestPayoffs:
    """Tests for payoff series and CSV dumps."""

    def _paths(self):
        from montecarlo import ModelParams, PathSet
        prices = np.array([[[100.0, 100.0], [90.0, 120.0], [95.0, 105.0]]])
        return PathSet(
            prices=prices,
            variance=np.zeros_like(prices),
            exercise_times=np.array([0.0, 1.0, 2.0]),
            params=ModelParams(rate=0.1),
            seed=0,
            model="heston",
        )

    def test_max_call(self):
        from montecarlo import max_call_payoff
        Z = max_call_payoff(self._paths(), 100.0).Z
        assert np.allclose(Z, [[0.0, 20.0 * np.exp(-0.1), 5.0 * np.exp(-0.2)]])

    def test_min_put_with_rate_override(self):
        from montecarlo import min_put_payoff
        Z = min_put_payoff(self._paths(), 100.0, rate=0.0).Z
        assert np.allclose(Z, [[0.0, 10.0, 5.0]])

    def test_dump_paths_csv(self, temp_dir):
        import pandas as pd
        from montecarlo import dump_paths_csv
        target = dump_paths_csv(self._paths(), temp_dir / "paths.csv")
        frame = pd.read_csv(target)
        assert list(frame.columns) == ["path_id", "t", "asset", "price"]
        assert len(frame) == 6
        assert frame.loc[3, "price"] == 120.0
