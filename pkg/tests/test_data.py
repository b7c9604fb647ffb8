"""
Tests for the data module.
"""

import json

import numpy as np
import pytest


class TestFederation:
    """Tests for Dataset and Federation containers."""

    def test_properties(self, small_federation):
        """Counts and dimensions are reported."""
        assert small_federation.n_datasets == 3
        assert small_federation.feature_dim == 3
        assert small_federation.total_samples == 18
        assert small_federation.main.id == 1

    def test_mismatched_feature_dims(self, rng):
        """Datasets must share p."""
        from data import federation_from_arrays
        from exceptions import DimensionError
        with pytest.raises(DimensionError):
            federation_from_arrays([rng.standard_normal((4, 2)), rng.standard_normal((4, 3))], [np.ones(4)] * 2)

    def test_empty_dataset_rejected(self):
        """A dataset needs at least one row."""
        from data import Dataset
        from exceptions import DimensionError
        with pytest.raises(DimensionError):
            Dataset(U=np.ones((0, 2)), Y=np.ones(0), id=1)

    def test_teacher_federation_deterministic(self):
        """Same seed, same data."""
        from data import gen_teacher_federation
        from features import build_feature_map
        fm = build_feature_map(2, 6, seed=1)
        a = gen_teacher_federation(2, 2, [5, 7], 4, fm, seed=3)
        b = gen_teacher_federation(2, 2, [5, 7], 4, fm, seed=3)
        assert a.sizes() == [5, 7]
        for da, db in zip(a.datasets, b.datasets):
            assert np.array_equal(da.U, db.U)
            assert np.array_equal(da.Y, db.Y)


class TestAssumptions:
    """Tests for check_assumptions."""

    def test_psd_flags(self, small_federation):
        """Gram-type matrices are PSD for non-negative weights."""
        from data import check_assumptions
        report = check_assumptions(small_federation, np.array([0.5, 0.3, 0.2]))
        assert report.gram_psd
        assert report.weighted_psd
        assert report.K_x > 0.0
        assert report.K_y > 0.0

    def test_reports_positive_weighted_minimum(self, small_federation):
        """A full-rank weighted Gram reports its positive minimum scaled by |w|^2."""
        from data import check_assumptions
        w = np.array([0.5, 0.3, 0.2])
        weighted = sum(wi * ds.U.T @ ds.U for wi, ds in zip(w, small_federation.datasets))
        expected = np.linalg.eigvalsh(weighted)[0] * (w @ w)
        report = check_assumptions(small_federation, w)
        assert expected > 0.0
        assert report.min_weighted_eig == pytest.approx(expected, rel=1e-10)
        assert report.min_gram_eig > 0.0

    def test_indefinite_weighting_flagged(self, small_federation):
        from data import check_assumptions
        report = check_assumptions(small_federation, np.array([1.0, -5.0, 0.1]))
        assert report.gram_psd
        assert report.min_weighted_eig < 0.0
        assert not report.weighted_psd


class TestPerturb:
    """Tests for adversarial perturbations."""

    def test_trivial_specs_return_input(self, small_federation):
        """q=0 or eps=0 leaves the federation untouched."""
        from data import AttackSpec, perturb
        assert perturb(small_federation, AttackSpec(q=0.0, eps=0.1)) is small_federation
        assert perturb(small_federation, AttackSpec(q=0.5, eps=0.0)) is small_federation

    def test_changed_fraction_and_radii(self, small_federation):
        """floor(q N_bar) pairs move by eps in features and eps in squared target."""
        from data import AttackSpec, measure_perturbation, perturb
        attacked = perturb(small_federation, AttackSpec(q=0.5, eps=0.04, seed=2))
        stats = measure_perturbation(small_federation, attacked)
        assert stats.changed == 9
        assert stats.changed_fraction == pytest.approx(0.5)
        assert stats.max_feature_radius == pytest.approx(0.04)
        assert stats.max_target_sq_radius == pytest.approx(0.04)

    def test_seeded(self, small_federation):
        """The same attack seed picks the same pairs."""
        from data import AttackSpec, perturb
        a = perturb(small_federation, AttackSpec(q=0.3, eps=0.1, seed=4))
        b = perturb(small_federation, AttackSpec(q=0.3, eps=0.1, seed=4))
        for da, db in zip(a.datasets, b.datasets):
            assert np.array_equal(da.U, db.U)

    def test_invalid_q(self):
        """q outside [0, 1] is rejected."""
        from data import AttackSpec
        with pytest.raises(ValueError):
            AttackSpec(q=1.5, eps=0.1)


class TestCsvRoundTrip:
    """Tests for save_federation and load_federation."""

    def test_teacher_federation_reloads(self, teacher_federation, temp_dir):
        """X is re-featurized through the stored map."""
        from data import load_federation, save_federation
        save_federation(teacher_federation, temp_dir / "fed", seed=7)
        loaded = load_federation(temp_dir / "fed")
        assert loaded.sizes() == teacher_federation.sizes()
        for a, b in zip(teacher_federation.datasets, loaded.datasets):
            assert np.allclose(a.U, b.U, rtol=1e-12, atol=1e-12)
            assert np.allclose(a.Y, b.Y, rtol=1e-12, atol=1e-12)

    def test_meta_contents(self, teacher_federation, temp_dir):
        """meta.json records the feature map."""
        from data import save_federation
        save_federation(teacher_federation, temp_dir / "fed", seed=3)
        meta = json.loads((temp_dir / "fed" / "meta.json").read_text())
        assert meta["d"] == 2
        assert meta["hidden_width"] == 15
        assert meta["seed"] == 7
        assert meta["data_seed"] == 3

    def test_featurized_only(self, small_federation, temp_dir):
        """Without X the features themselves are stored."""
        from data import load_federation, save_federation
        save_federation(small_federation, temp_dir / "fed")
        assert (temp_dir / "fed" / "dataset_1" / "U.csv").exists()
        loaded = load_federation(temp_dir / "fed")
        assert np.allclose(loaded.main.U, small_federation.main.U)

    def test_missing_meta(self, temp_dir):
        """A directory without meta.json is malformed."""
        from data import load_federation
        from exceptions import DataFormatError
        with pytest.raises(DataFormatError):
            load_federation(temp_dir)

    def test_non_numeric_csv(self, small_federation, temp_dir):
        """Garbage in Y.csv is reported with the file path."""
        from data import load_federation, save_federation
        from exceptions import DataFormatError
        save_federation(small_federation, temp_dir / "fed")
        (temp_dir / "fed" / "dataset_2" / "Y.csv").write_text("y\nabc\n")
        with pytest.raises(DataFormatError) as exc:
            load_federation(temp_dir / "fed")
        assert "Y.csv" in exc.value.details["filepath"]
