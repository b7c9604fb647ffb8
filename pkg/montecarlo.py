"""
fedregret - Path Simulation
Heston and rough Heston Monte Carlo paths on a Bermudan exercise grid, plus
discounted payoff series.

Each path draws its normals from its own counter-based generator keyed by
(seed, stream, path index), so a path does not depend on how many paths are
simulated alongside it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.special import gamma as gamma_fn

from exceptions import SimulationError
from logging_config import get_logger

logger = get_logger(__name__)


# =============================================================================
# Types
# =============================================================================

@dataclass(frozen=True)
class ModelParams:
    """Heston parameters; hurst < 1/2 selects the rough variant. v0 defaults to v_inf."""

    rate: float = 0.05
    dividend: float = 0.1
    mean_reversion: float = 2.0
    v_inf: float = 0.01
    vol_of_vol: float = 0.2
    correlation: float = -0.3
    x0: float = 100.0
    v0: float | None = None
    hurst: float = 0.5

    def __post_init__(self) -> None:
        if self.v0 is None:
            object.__setattr__(self, "v0", self.v_inf)
        checks = [
            ("correlation", -1.0 <= self.correlation <= 1.0),
            ("v0", self.v0 >= 0.0),
            ("v_inf", self.v_inf >= 0.0),
            ("hurst", 0.0 < self.hurst <= 0.5),
            ("x0", self.x0 > 0.0),
            ("mean_reversion", self.mean_reversion >= 0.0),
            ("vol_of_vol", self.vol_of_vol >= 0.0),
        ]
        for name, ok in checks:
            if not ok:
                raise SimulationError(f"Invalid model parameter {name}={getattr(self, name)}", parameter=name)

    @property
    def is_rough(self) -> bool:
        return self.hurst < 0.5


@dataclass(frozen=True)
class PathSet:
    """Prices and truncated variances on the exercise grid, shape (paths, M+1, assets)."""

    prices: np.ndarray
    variance: np.ndarray
    exercise_times: np.ndarray
    params: ModelParams
    seed: int
    model: str

    @property
    def n_paths(self) -> int:
        return int(self.prices.shape[0])

    @property
    def n_dates(self) -> int:
        """M, the number of exercise dates after t = 0."""
        return int(self.prices.shape[1] - 1)

    @property
    def n_assets(self) -> int:
        return int(self.prices.shape[2])

    @property
    def maturity(self) -> float:
        return float(self.exercise_times[-1])


@dataclass(frozen=True)
class PayoffSeries:
    """Discounted payoffs Z, shape (paths, M+1)."""

    Z: np.ndarray
    exercise_times: np.ndarray


# =============================================================================
# Random Streams
# =============================================================================

def _path_normals(seed: int, stream: int, n_paths: int, n_steps: int, d_assets: int) -> np.ndarray:
    """Standard normals of shape (paths, steps, assets, 2), one Philox stream per path."""
    out = np.empty((n_paths, n_steps, d_assets, 2))
    for j in range(n_paths):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream, j])))
        out[j] = rng.standard_normal((n_steps, d_assets, 2))
    return out


def _validate_grid(n_paths: int, M: int, T_mat: float, d_assets: int) -> None:
    if n_paths < 1:
        raise SimulationError(f"n_paths must be positive, got {n_paths}", parameter="n_paths")
    if M < 1:
        raise SimulationError(f"M must be positive, got {M}", parameter="M")
    if not T_mat > 0.0:
        raise SimulationError(f"T_mat must be positive, got {T_mat}", parameter="T_mat")
    if d_assets < 1:
        raise SimulationError(f"d_assets must be positive, got {d_assets}", parameter="d_assets")


# =============================================================================
# Simulation
# =============================================================================

def simulate_heston(
    params: ModelParams,
    d_assets: int,
    n_paths: int,
    M: int,
    T_mat: float,
    substeps: int = 10,
    seed: int = 0,
    stream: int = 0,
) -> PathSet:
    """
    Full-truncation Euler for the variance and log-Euler for the price, with
    M * substeps steps. Assets are i.i.d., each with its own variance process.
    """
    if params.is_rough:
        raise SimulationError("simulate_heston needs hurst = 1/2", parameter="hurst")
    if substeps < 1:
        raise SimulationError(f"substeps must be positive, got {substeps}", parameter="substeps")
    _validate_grid(n_paths, M, T_mat, d_assets)

    n_steps = M * substeps
    dt = T_mat / n_steps
    sqrt_dt = math.sqrt(dt)
    rho = params.correlation
    rho_bar = math.sqrt(max(1.0 - rho * rho, 0.0))
    drift = params.rate - params.dividend
    normals = _path_normals(seed, stream, n_paths, n_steps, d_assets)

    log_x = np.zeros((n_paths, d_assets))
    v = np.full((n_paths, d_assets), float(params.v0))
    prices = np.empty((n_paths, M + 1, d_assets))
    variance = np.empty((n_paths, M + 1, d_assets))
    prices[:, 0] = params.x0
    variance[:, 0] = max(params.v0, 0.0)

    for k in range(n_steps):
        z1 = normals[:, k, :, 0]
        z2 = rho * z1 + rho_bar * normals[:, k, :, 1]
        v_pos = np.maximum(v, 0.0)
        vol = np.sqrt(v_pos)
        log_x += (drift - 0.5 * v_pos) * dt + vol * sqrt_dt * z1
        v = v + params.mean_reversion * (params.v_inf - v_pos) * dt + params.vol_of_vol * vol * sqrt_dt * z2
        if (k + 1) % substeps == 0:
            m = (k + 1) // substeps
            prices[:, m] = params.x0 * np.exp(log_x)
            variance[:, m] = np.maximum(v, 0.0)

    logger.debug(f"simulate_heston: {n_paths} paths, {d_assets} assets, {n_steps} steps")
    return PathSet(
        prices=prices,
        variance=variance,
        exercise_times=np.linspace(0.0, T_mat, M + 1),
        params=params,
        seed=seed,
        model="heston",
    )


def volterra_weights(hurst: float, n_steps: int, dt: float) -> np.ndarray:
    """K(m dt) = (m dt)^(H - 1/2) / Gamma(H + 1/2) for lags m = 0..n_steps; entry 0 unused."""
    lags = np.arange(1, n_steps + 1, dtype=float) * dt
    weights = np.zeros(n_steps + 1)
    weights[1:] = lags ** (hurst - 0.5) / gamma_fn(hurst + 0.5)
    return weights


def simulate_rough_heston(
    params: ModelParams,
    d_assets: int,
    n_paths: int,
    M: int,
    T_mat: float,
    fine_steps: int = 300,
    seed: int = 0,
    stream: int = 0,
) -> PathSet:
    """
    Left-point Volterra Euler for the rough variance

        v_i = v0 + sum_{j<i} K(t_i - t_j) [k (v_inf - v_j^+) dt + sigma sqrt(v_j^+) dB_j]

    with the price driven by v_j^+ as in simulate_heston. The fine grid is
    rounded up to a multiple of M. hurst = 1/2 is routed to simulate_heston.
    """
    if fine_steps < M:
        raise SimulationError(f"fine_steps must be at least M={M}, got {fine_steps}", parameter="fine_steps")
    substeps = math.ceil(fine_steps / M)
    if not params.is_rough:
        return simulate_heston(params, d_assets, n_paths, M, T_mat, substeps=substeps, seed=seed, stream=stream)
    _validate_grid(n_paths, M, T_mat, d_assets)

    n_steps = M * substeps
    dt = T_mat / n_steps
    sqrt_dt = math.sqrt(dt)
    rho = params.correlation
    rho_bar = math.sqrt(max(1.0 - rho * rho, 0.0))
    drift = params.rate - params.dividend
    kernel = volterra_weights(params.hurst, n_steps, dt)
    normals = _path_normals(seed, stream, n_paths, n_steps, d_assets)

    increments = np.zeros((n_paths, d_assets, n_steps))
    log_x = np.zeros((n_paths, d_assets))
    v = np.full((n_paths, d_assets), float(params.v0))
    prices = np.empty((n_paths, M + 1, d_assets))
    variance = np.empty((n_paths, M + 1, d_assets))
    prices[:, 0] = params.x0
    variance[:, 0] = max(params.v0, 0.0)

    for i in range(n_steps):
        z1 = normals[:, i, :, 0]
        z2 = rho * z1 + rho_bar * normals[:, i, :, 1]
        v_pos = np.maximum(v, 0.0)
        vol = np.sqrt(v_pos)
        log_x += (drift - 0.5 * v_pos) * dt + vol * sqrt_dt * z1
        increments[:, :, i] = params.mean_reversion * (params.v_inf - v_pos) * dt + params.vol_of_vol * vol * sqrt_dt * z2
        # lags i+1-j for j = 0..i
        v = params.v0 + increments[:, :, : i + 1] @ kernel[i + 1 : 0 : -1]
        if (i + 1) % substeps == 0:
            m = (i + 1) // substeps
            prices[:, m] = params.x0 * np.exp(log_x)
            variance[:, m] = np.maximum(v, 0.0)

    logger.debug(f"simulate_rough_heston: H={params.hurst}, {n_paths} paths, {n_steps} fine steps")
    return PathSet(
        prices=prices,
        variance=variance,
        exercise_times=np.linspace(0.0, T_mat, M + 1),
        params=params,
        seed=seed,
        model="rough_heston",
    )


def simulate(
    params: ModelParams,
    d_assets: int,
    n_paths: int,
    M: int,
    T_mat: float,
    substeps: int = 10,
    fine_steps: int = 300,
    seed: int = 0,
    stream: int = 0,
) -> PathSet:
    """Dispatch on the Hurst parameter."""
    if params.is_rough:
        return simulate_rough_heston(params, d_assets, n_paths, M, T_mat, fine_steps, seed=seed, stream=stream)
    return simulate_heston(params, d_assets, n_paths, M, T_mat, substeps, seed=seed, stream=stream)


# =============================================================================
# Payoffs
# =============================================================================

def _discount(paths: PathSet, rate: float | None) -> np.ndarray:
    r = paths.params.rate if rate is None else rate
    return np.exp(-r * paths.exercise_times)


def max_call_payoff(paths: PathSet, strike: float, rate: float | None = None) -> PayoffSeries:
    """Z_t = exp(-r t) (max_k X^k_t - K)_+; rate defaults to the model's."""
    intrinsic = np.maximum(paths.prices.max(axis=2) - strike, 0.0)
    return PayoffSeries(Z=intrinsic * _discount(paths, rate), exercise_times=paths.exercise_times)


def min_put_payoff(paths: PathSet, strike: float, rate: float | None = None) -> PayoffSeries:
    """Z_t = exp(-r t) (K - min_k X^k_t)_+."""
    intrinsic = np.maximum(strike - paths.prices.min(axis=2), 0.0)
    return PayoffSeries(Z=intrinsic * _discount(paths, rate), exercise_times=paths.exercise_times)


PAYOFFS = {"max_call": max_call_payoff, "min_put": min_put_payoff}


def dump_paths_csv(paths: PathSet, path: Path | str) -> Path:
    """Long-format dump with columns path_id, t, asset, price."""
    n, steps, assets = paths.prices.shape
    frame = pd.DataFrame(
        {
            "path_id": np.repeat(np.arange(n), steps * assets),
            "t": np.tile(np.repeat(paths.exercise_times, assets), n),
            "asset": np.tile(np.arange(assets), n * steps),
            "price": paths.prices.reshape(-1),
        }
    )
    target = Path(path)
    frame.to_csv(target, index=False)
    return target


__all__ = [
    "ModelParams",
    "PathSet",
    "PayoffSeries",
    "simulate_heston",
    "simulate_rough_heston",
    "simulate",
    "volterra_weights",
    "max_call_payoff",
    "min_put_payoff",
    "PAYOFFS",
    "dump_paths_csv",
]
