"""
Tests for utils.parallel.
"""

import pytest


class TestResolveThreads:
    """Tests for resolve_threads."""

    def test_explicit_argument_wins(self, clean_env, monkeypatch):
        from utils.parallel import resolve_threads
        monkeypatch.setenv("FEDREGRET_THREADS", "8")
        assert resolve_threads(3) == 3

    def test_environment_fallback(self, clean_env, monkeypatch):
        from utils.parallel import resolve_threads
        monkeypatch.setenv("FEDREGRET_THREADS", "4")
        assert resolve_threads() == 4

    def test_bad_environment_value(self, clean_env, monkeypatch):
        from utils.parallel import resolve_threads
        monkeypatch.setenv("FEDREGRET_THREADS", "many")
        assert resolve_threads() == 1

    def test_at_least_one(self):
        from utils.parallel import resolve_threads
        assert resolve_threads(0) == 1
        assert resolve_threads(-2) == 1


class TestRunCells:
    """Tests for run_cells."""

    @pytest.mark.parametrize("threads", [1, 4])
    def test_preserves_order(self, threads):
        from utils.parallel import run_cells
        assert run_cells(lambda x: x * x, range(10), threads) == [x * x for x in range(10)]

    def test_empty(self):
        from utils.parallel import run_cells
        assert run_cells(lambda x: x, [], 3) == []

    def test_exception_propagates(self):
        from utils.parallel import run_cells

        def fail(x):
            if x == 2:
                raise RuntimeError("cell 2")
            return x

        with pytest.raises(RuntimeError):
            run_cells(fail, range(4), 2)


class TestChildSeed:
    """Tests for child_seed."""

    def test_deterministic(self):
        from utils.parallel import child_seed
        assert child_seed(3, "train", 2) == child_seed(3, "train", 2)

    def test_keys_separate_streams(self):
        from utils.parallel import child_seed
        seeds = {child_seed(3, "train", 2), child_seed(3, "train", 1), child_seed(3, "eval", 2), child_seed(4, "train", 2)}
        assert len(seeds) == 4

    def test_range(self):
        from utils.parallel import child_seed
        for k in range(20):
            assert 0 <= child_seed(k, "map") < 2 ** 63
