"""
Tests for the accelerated module.
"""

import numpy as np
import pytest


def _psd(rng, p):
    A = rng.standard_normal((p, p))
    return A @ A.T / p


class TestBlockAlgebra:
    """Tests for reconstruct_full and gamma_maps."""

    def test_reconstruct_full_layout(self):
        """pi1 on the diagonal, pi2 off it, pi3 repeated."""
        from accelerated import reconstruct_full
        pi1 = np.array([[2.0, 0.5], [0.5, 1.0]])
        pi2 = np.array([[0.3, 0.1], [0.1, 0.2]])
        P_hat, S_hat = reconstruct_full(pi1, pi2, np.array([1.0, -1.0]), 3)
        assert P_hat.shape == (6, 6)
        for i in range(3):
            for j in range(3):
                block = P_hat[2 * i:2 * i + 2, 2 * j:2 * j + 2]
                assert np.array_equal(block, pi1 if i == j else pi2)
        assert np.array_equal(S_hat, [1.0, -1.0] * 3)

    @pytest.mark.parametrize("N", [2, 3, 5])
    def test_gamma_maps_invert_block_toeplitz(self, rng, N):
        """gamma1 and gamma2 are the blocks of [(lam+beta)I + P_hat]^{-1}."""
        from accelerated import gamma_maps, reconstruct_full
        from regret import RegretConfig
        p = 3
        B = _psd(rng, p)
        pi1, pi2 = _psd(rng, p) + B, B
        cfg = RegretConfig(lam=0.5, beta=1.0, horizon=1)
        g1, g2 = gamma_maps(pi1, pi2, cfg, N)
        P_hat, _ = reconstruct_full(pi1, pi2, np.zeros(p), N)
        inverse = np.linalg.inv(cfg.shift * np.eye(N * p) + P_hat)
        assert np.allclose(inverse[:p, :p], g1, rtol=0, atol=1e-10)
        assert np.allclose(inverse[:p, p:2 * p], g2, rtol=0, atol=1e-10)

    def test_gamma_maps_eigenvalue_form(self):
        """1-D inputs behave like diagonal blocks."""
        from accelerated import gamma_maps
        from regret import RegretConfig
        cfg = RegretConfig(lam=0.0, beta=1.0, horizon=1)
        pi1 = np.array([0.4, 1.5])
        pi2 = np.array([0.1, 0.7])
        g1, g2 = gamma_maps(pi1, pi2, cfg, 4)
        m1, m2 = gamma_maps(np.diag(pi1), np.diag(pi2), cfg, 4)
        assert np.allclose(np.diag(m1), g1, rtol=0, atol=1e-12)
        assert np.allclose(np.diag(m2), g2, rtol=0, atol=1e-12)


class TestAcceleratedAlgorithm:
    """The symmetric recursion reproduces the full one under uniform weights."""

    @pytest.mark.parametrize("N", [2, 3, 5])
    @pytest.mark.parametrize("p", [1, 3])
    @pytest.mark.parametrize("T", [2, 5])
    def test_matches_regret_optimal(self, make_federation, N, p, T):
        """Same trajectory as the full algorithm with w = 1/N and anchor Theta*_(N)."""
        from accelerated import accelerated_regret_optimal
        from features import RidgeConfig
        from regret import RegretConfig, regret_optimal
        from sharing import local_optima
        fed = make_federation(N, p)
        optima = local_optima(fed, RidgeConfig(kappa=0.5))
        cfg = RegretConfig(lam=0.8, beta=1.0, horizon=T, backend="dense")
        uniform = np.full(N, 1.0 / N)
        full, _ = regret_optimal(fed, uniform, optima, cfg, anchor=optima.stacked_mean, start=optima.stacked)
        fast, _ = accelerated_regret_optimal(fed, optima, cfg, representation="matrix")
        assert np.allclose(full.states, fast.states, rtol=0, atol=1e-9)

    def test_blocks_reconstruct_dense_tape(self, make_federation):
        """pi1, pi2 and pi3 rebuild every P(t) and S(t) of the full tape."""
        from accelerated import reconstruct_full, sym_backward, sym_terminal
        from features import RidgeConfig
        from regret import RegretConfig, backward_riccati, terminal_conditions
        from sharing import local_optima
        fed = make_federation(3, 2)
        optima = local_optima(fed, RidgeConfig(kappa=1.0))
        cfg = RegretConfig(lam=0.3, beta=1.2, horizon=4, backend="dense")
        dense = backward_riccati(terminal_conditions(fed, np.full(3, 1.0 / 3)), cfg, optima.stacked_mean)
        sym = sym_backward(sym_terminal(fed), cfg, 3, optima.mean_theta, representation="matrix")
        for t in range(cfg.horizon + 1):
            P_hat, S_hat = reconstruct_full(sym.pi1[t], sym.pi2[t], sym.pi3[t], 3)
            assert np.allclose(P_hat, dense.P(t), rtol=0, atol=1e-10)
            assert np.allclose(S_hat, dense.S[t], rtol=0, atol=1e-10)

    @pytest.mark.parametrize("lam", [0.0, 1.5])
    def test_matrix_and_diagonal_agree(self, make_federation, lam):
        """Both block representations give the same rollout."""
        from accelerated import accelerated_regret_optimal
        from features import RidgeConfig
        from regret import RegretConfig
        from sharing import local_optima
        fed = make_federation(4, 3)
        optima = local_optima(fed, RidgeConfig(kappa=0.5))
        cfg = RegretConfig(lam=lam, beta=1.0, horizon=6)
        matrix, m_tape = accelerated_regret_optimal(fed, optima, cfg, representation="matrix")
        diagonal, d_tape = accelerated_regret_optimal(fed, optima, cfg, representation="diagonal")
        assert m_tape.representation == "matrix"
        assert d_tape.representation == "diagonal"
        assert np.allclose(matrix.states, diagonal.states, rtol=0, atol=1e-9)
        assert np.allclose(m_tape.block("pi1", 2), d_tape.block("pi1", 2), rtol=0, atol=1e-10)

    def test_homotopy_gap_vanishes_at_uniform(self, make_federation):
        """At s=1 the weighted run is the uniform run."""
        from accelerated import homotopy_gaps
        from features import RidgeConfig
        from regret import RegretConfig
        from sharing import local_optima
        fed = make_federation(3, 2)
        optima = local_optima(fed, RidgeConfig(kappa=0.5))
        gaps = homotopy_gaps(fed, optima, np.array([0.7, 0.2, 0.1]), RegretConfig(lam=0.5, horizon=5), s_grid=(0.0, 1.0))
        assert gaps.shape == (2,)
        assert abs(gaps[1]) < 1e-9
        assert gaps[0] > gaps[1]

    @pytest.mark.parametrize("seed", range(8))
    def test_homotopy_gaps_full_grid(self, seed):
        """Every weighted run costs at least ARO under uniform weights; s=1 is the grid minimum."""
        from accelerated import homotopy_gaps
        from data import federation_from_arrays
        from features import RidgeConfig
        from regret import RegretConfig
        from sharing import local_optima
        rng = np.random.default_rng(seed)
        fed = federation_from_arrays(
            [rng.standard_normal((6, 3)) for _ in range(3)],
            [rng.standard_normal(6) for _ in range(3)],
        )
        optima = local_optima(fed, RidgeConfig(kappa=0.5))
        w_star = rng.dirichlet(np.ones(3))
        gaps = homotopy_gaps(fed, optima, w_star, RegretConfig(lam=0.5, horizon=5))
        assert gaps.shape == (5,)
        assert np.all(np.isfinite(gaps))
        assert np.all(gaps >= -1e-9)
        assert abs(gaps[-1]) < 1e-9
        assert np.all(gaps[:-1] >= gaps[-1] - 1e-9)

    def test_optima_mismatch(self, make_federation):
        """Optima from another federation shape are rejected."""
        from accelerated import accelerated_rollout, sym_backward, sym_terminal
        from exceptions import DimensionError
        from features import RidgeConfig
        from regret import RegretConfig
        from sharing import local_optima
        fed = make_federation(3, 2)
        other = local_optima(make_federation(2, 2), RidgeConfig(kappa=1.0))
        cfg = RegretConfig(horizon=2)
        tape = sym_backward(sym_terminal(fed), cfg, 3, np.zeros(2))
        with pytest.raises(DimensionError):
            accelerated_rollout(other, tape, cfg)

    def test_select_representation(self):
        from accelerated import select_representation
        from regret import RegretConfig
        assert select_representation("auto", RegretConfig(horizon=10), 10) == "matrix"
        assert select_representation("auto", RegretConfig(horizon=10, memory_budget=100), 10) == "diagonal"
        assert select_representation("diagonal", RegretConfig(horizon=10), 10) == "diagonal"


class TestBenchmark:
    """Tests for the timing harness."""

    def test_rows(self):
        """One row per N with positive timings."""
        from accelerated import benchmark
        rows = benchmark([2, 3], p=3, T=4, seed=0, repeats=1)
        assert [r.n_datasets for r in rows] == [2, 3]
        for row in rows:
            assert row.feature_dim == 3
            assert row.horizon == 4
            assert row.t_ro > 0.0
            assert row.t_aro > 0.0
            assert row.ratio > 0.0
