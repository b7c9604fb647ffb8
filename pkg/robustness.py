"""
fedregret - Robustness Sweep
Sweeps attack persistence q and severity eps, reruns the regret-optimal
algorithm on every perturbed federation at fixed weights and records how far
the optimal cost moves relative to eps * sqrt(N_bar * q).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from itertools import product
from typing import Sequence

import numpy as np
import pandas as pd

from data import AttackSpec, Federation, check_assumptions, perturb
from features import RidgeConfig
from logging_config import get_logger, log_operation
from regret import RegretConfig, backward_riccati, cost_via_value_function, terminal_conditions
from sharing import local_optima
from utils.parallel import run_cells

logger = get_logger(__name__)


@dataclass(frozen=True)
class RobustnessRow:
    q: float
    eps: float
    seed: int
    delta_L: float
    bound_factor: float
    ratio: float


@dataclass(frozen=True)
class RobustnessReport:
    rows: tuple[RobustnessRow, ...]
    clean_cost: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(row) for row in self.rows], columns=list(RobustnessRow.__dataclass_fields__))


def _optimal_cost(fed: Federation, w: np.ndarray, cfg: RegretConfig, ridge: RidgeConfig) -> float:
    anchor = local_optima(fed, ridge).stacked
    tape = backward_riccati(terminal_conditions(fed, w), cfg, anchor)
    return cost_via_value_function(tape, anchor)


def robustness_sweep(
    fed: Federation,
    w: np.ndarray,
    cfg: RegretConfig,
    q_grid: Sequence[float],
    eps_grid: Sequence[float],
    seeds: Sequence[int],
    ridge: RidgeConfig | None = None,
    threads: int | None = 1,
) -> RobustnessReport:
    """
    One row per (q, eps, seed). The weights w stay fixed for clean and attacked
    runs; each attacked run recomputes its own local optima as anchor.
    """
    if not q_grid or not eps_grid or not seeds:
        raise ValueError("q_grid, eps_grid and seeds must be nonempty")
    ridge = ridge or RidgeConfig()
    w = np.asarray(w, dtype=float)
    clean = _optimal_cost(fed, w, cfg, ridge)

    def cell(args: tuple[float, float, int]) -> RobustnessRow:
        q, eps, seed = args
        attacked = perturb(fed, AttackSpec(q=q, eps=eps, seed=seed))
        if attacked is fed:
            delta = 0.0
        else:
            report = check_assumptions(attacked, w)
            if not (report.gram_psd and report.weighted_psd):
                logger.warning(f"Perturbed federation fails PSD checks at q={q}, eps={eps}, seed={seed}")
            delta = abs(clean - _optimal_cost(attacked, w, cfg, ridge))
        bound = eps * math.sqrt(fed.total_samples * q)
        ratio = 0.0 if bound == 0.0 and delta == 0.0 else (delta / bound if bound > 0.0 else float("inf"))
        return RobustnessRow(q=q, eps=eps, seed=seed, delta_L=delta, bound_factor=bound, ratio=ratio)

    cells = [(float(q), float(eps), int(s)) for q, eps, s in product(q_grid, eps_grid, seeds)]
    rows = run_cells(cell, cells, threads)
    report = RobustnessReport(rows=tuple(rows), clean_cost=clean)
    max_ratio, median_ratio = summary(report)
    log_operation(
        logger,
        "robustness_sweep",
        True,
        {"cells": len(rows), "max_ratio": f"{max_ratio:.4g}", "median_ratio": f"{median_ratio:.4g}"},
    )
    return report


def summary(report: RobustnessReport) -> tuple[float, float]:
    """(max ratio, median of the positive ratios); zeros when nothing moved."""
    ratios = np.array([row.ratio for row in report.rows])
    positive = ratios[ratios > 0.0]
    if positive.size == 0:
        return 0.0, 0.0
    return float(ratios.max()), float(np.median(positive))


__all__ = ["RobustnessRow", "RobustnessReport", "robustness_sweep", "summary"]
