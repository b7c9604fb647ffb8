"""
fedregret - Utilities Package
"""

from utils.parallel import child_seed, resolve_threads, run_cells

__all__ = [
    "child_seed",
    "resolve_threads",
    "run_cells",
]
