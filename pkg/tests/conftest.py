"""
Pytest fixtures and configuration for fedregret tests.
"""

import os
import sys
import tempfile
from pathlib import Path
from typing import Generator
from unittest.mock import patch

import numpy as np
import pytest

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))


@pytest.fixture
def temp_dir() -> Generator[Path, None, None]:
    """Create a temporary directory for tests."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def mock_env() -> Generator[dict[str, str], None, None]:
    """
    Mock environment variables for testing.
    Restores original environment after test.
    """
    original_env = os.environ.copy()
    test_env: dict[str, str] = {}

    with patch.dict(os.environ, test_env, clear=False):
        yield test_env

    os.environ.clear()
    os.environ.update(original_env)


@pytest.fixture
def clean_env() -> Generator[None, None, None]:
    """
    Run test with a clean environment (fedregret vars removed).
    """
    keys_to_remove = [
        "FEDREGRET_THREADS",
        "FEDREGRET_OUTPUT_DIR",
        "FEDREGRET_SEED",
        "LOG_LEVEL",
    ]

    original_values = {}
    for key in keys_to_remove:
        if key in os.environ:
            original_values[key] = os.environ.pop(key)

    yield

    for key, value in original_values.items():
        os.environ[key] = value


@pytest.fixture
def reset_logging() -> Generator[None, None, None]:
    """Reset logging configuration between tests."""
    import logging
    import logging_config

    root_logger = logging.getLogger()
    original_configured = logging_config._configured
    original_level = root_logger.level
    original_handlers = root_logger.handlers[:]

    logging_config._configured = False

    yield

    def ours(handler: logging.Handler) -> bool:
        # pytest swaps its capture handlers per phase
        return not type(handler).__module__.startswith("_pytest")

    for handler in root_logger.handlers[:]:
        if ours(handler) and handler not in original_handlers:
            handler.close()
            root_logger.removeHandler(handler)
    for handler in original_handlers:
        if ours(handler) and handler not in root_logger.handlers:
            root_logger.addHandler(handler)
    root_logger.setLevel(original_level)
    logging_config._configured = original_configured


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator for randomized instances."""
    return np.random.default_rng(20240607)


@pytest.fixture
def make_federation(rng: np.random.Generator):
    """Factory for small random federations with already-featurized data."""
    from data import federation_from_arrays

    def make(N: int, p: int, n: int = 6):
        U_list = [rng.standard_normal((n, p)) for _ in range(N)]
        Y_list = [rng.standard_normal(n) for _ in range(N)]
        return federation_from_arrays(U_list, Y_list)

    return make


@pytest.fixture
def small_federation(make_federation):
    """Three datasets, p=3, six samples each."""
    return make_federation(3, 3)


@pytest.fixture
def teacher_federation():
    """Teacher-network federation: N=3, d=2, 20 samples each, width-15 features."""
    from data import gen_teacher_federation
    from features import build_feature_map

    feature_map = build_feature_map(2, 15, seed=7)
    return gen_teacher_federation(3, 2, 20, 5, feature_map, seed=11)
