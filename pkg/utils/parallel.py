"""
fedregret - Parallel Utilities
Deterministic fan-out of independent experiment cells and seed derivation.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Iterable, Sequence, TypeVar

import numpy as np

from logging_config import get_logger

logger = get_logger(__name__)

# Type variables
C = TypeVar("C")
R = TypeVar("R")


def resolve_threads(threads: int | None = None) -> int:
    """Worker count from the argument, else FEDREGRET_THREADS, else 1."""
    if threads is None:
        raw = os.getenv("FEDREGRET_THREADS", "1")
        try:
            threads = int(raw)
        except ValueError:
            logger.warning(f"Ignoring non-integer FEDREGRET_THREADS={raw!r}")
            threads = 1
    return max(1, int(threads))


def run_cells(
    fn: Callable[[C], R],
    cells: Iterable[C],
    threads: int | None = 1,
) -> list[R]:
    """
    Apply fn to every cell and return results in input order.

    Cells must be independent; with threads=1 they run inline on the caller's
    thread. The first exception raised by any cell propagates.
    """
    items: Sequence[C] = list(cells)
    workers = min(resolve_threads(threads), max(len(items), 1))
    if workers <= 1:
        return [fn(cell) for cell in items]

    logger.debug(f"Running {len(items)} cells on {workers} threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _key_to_int(key: Any) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key)
    # stable across processes, unlike hash()
    return int.from_bytes(str(key).encode("utf-8"), "little") % (2**63)


def child_seed(seed: int, *keys: Any) -> int:
    """
    Derive an independent 63-bit stream seed from a root seed and a key path,
    e.g. child_seed(3, "train", 2).
    """
    entropy = [int(seed)] + [_key_to_int(k) for k in keys]
    state = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


__all__ = ["run_cells", "child_seed", "resolve_threads"]
