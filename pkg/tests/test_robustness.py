"""
Tests for the robustness module.
"""

import numpy as np
import pytest


class TestRobustnessSweep:
    """Tests for robustness_sweep and summary."""

    def test_trivial_attacks_do_not_move_cost(self, small_federation):
        """q=0 or eps=0 rows have zero delta and zero ratio."""
        from regret import RegretConfig
        from robustness import robustness_sweep
        w = np.full(3, 1.0 / 3)
        report = robustness_sweep(small_federation, w, RegretConfig(lam=1.0, horizon=4), [0.0, 0.5], [0.0, 0.1], [0, 1])
        assert len(report.rows) == 8
        for row in report.rows:
            if row.q == 0.0 or row.eps == 0.0:
                assert row.delta_L == 0.0
                assert row.ratio == 0.0
            else:
                assert row.bound_factor == pytest.approx(0.1 * np.sqrt(18 * 0.5))
                assert row.delta_L >= 0.0

    def test_deterministic_across_threads(self, small_federation):
        """Cells are seeded by their own attack seed."""
        from regret import RegretConfig
        from robustness import robustness_sweep
        w = np.array([0.5, 0.3, 0.2])
        cfg = RegretConfig(lam=1.0, horizon=3)
        a = robustness_sweep(small_federation, w, cfg, [0.2, 0.4], [0.05], [0, 1, 2], threads=1)
        b = robustness_sweep(small_federation, w, cfg, [0.2, 0.4], [0.05], [0, 1, 2], threads=3)
        assert a.to_frame().equals(b.to_frame())

    def test_frame_columns(self, small_federation):
        from regret import RegretConfig
        from robustness import robustness_sweep
        report = robustness_sweep(small_federation, np.full(3, 1.0 / 3), RegretConfig(horizon=2), [0.5], [0.1], [0])
        assert list(report.to_frame().columns) == ["q", "eps", "seed", "delta_L", "bound_factor", "ratio"]

    def test_ratio_stays_within_envelope(self, teacher_federation):
        """Across the default grid the largest ratio is within 25x of the median one."""
        from features import RidgeConfig
        from regret import RegretConfig
        from robustness import robustness_sweep, summary
        from sharing import share
        ridge = RidgeConfig(kappa=1.0)
        _, sharing = share(teacher_federation, ridge, 2.0)
        report = robustness_sweep(
            teacher_federation,
            sharing.posterior,
            RegretConfig(lam=1.0, horizon=5),
            [0.05, 0.1, 0.2, 0.4],
            [0.01, 0.05, 0.1],
            range(5),
            ridge=ridge,
        )
        assert len(report.rows) == 60
        assert all(row.delta_L >= 0.0 for row in report.rows)
        max_ratio, median_ratio = summary(report)
        assert median_ratio > 0.0
        assert max_ratio / median_ratio <= 25.0

    def test_empty_grid_rejected(self, small_federation):
        from regret import RegretConfig
        from robustness import robustness_sweep
        with pytest.raises(ValueError):
            robustness_sweep(small_federation, np.full(3, 1.0 / 3), RegretConfig(), [], [0.1], [0])

    def test_summary(self):
        """Max over all ratios, median over the positive ones."""
        from robustness import RobustnessReport, RobustnessRow, summary
        rows = tuple(
            RobustnessRow(q=0.1, eps=0.1, seed=i, delta_L=r, bound_factor=1.0, ratio=r)
            for i, r in enumerate([0.0, 0.2, 0.4, 3.0])
        )
        assert summary(RobustnessReport(rows=rows, clean_cost=1.0)) == (3.0, pytest.approx(0.4))

    def test_summary_all_zero(self):
        from robustness import RobustnessReport, RobustnessRow, summary
        rows = (RobustnessRow(q=0.0, eps=0.1, seed=0, delta_L=0.0, bound_factor=0.0, ratio=0.0),)
        assert summary(RobustnessReport(rows=rows, clean_cost=1.0)) == (0.0, 0.0)
