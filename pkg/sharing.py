"""
fedregret - Information Sharing Weights
Local optima, main-dataset scores, the adaptive prior and the closed-form
posterior that minimizes expected score plus a KL penalty to the prior.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from data import Federation
from exceptions import DimensionError
from features import ParamVector, RidgeConfig, ridge_solve
from logging_config import get_logger
from utils.parallel import run_cells

logger = get_logger(__name__)


# =============================================================================
# Types
# =============================================================================

@dataclass(frozen=True)
class LocalOptima:
    """Per-dataset ridge solutions and their stacked / averaged forms."""

    thetas: tuple[ParamVector, ...]

    @property
    def n_datasets(self) -> int:
        return len(self.thetas)

    @property
    def feature_dim(self) -> int:
        return self.thetas[0].dim

    @property
    def matrix(self) -> np.ndarray:
        """N x p array whose rows are the theta*_i."""
        return np.vstack([t.values for t in self.thetas])

    @property
    def stacked(self) -> np.ndarray:
        return np.concatenate([t.values for t in self.thetas])

    @property
    def mean_theta(self) -> np.ndarray:
        return self.matrix.mean(axis=0)

    @property
    def stacked_mean(self) -> np.ndarray:
        return np.tile(self.mean_theta, self.n_datasets)


@dataclass(frozen=True)
class SharingResult:
    scores: np.ndarray
    prior: np.ndarray
    posterior: np.ndarray
    eta: float
    exponent_sign: int = -1

    @property
    def support(self) -> np.ndarray:
        return self.prior > 0.0


# =============================================================================
# Local Optima and Scores
# =============================================================================

def local_optima(
    fed: Federation,
    cfg: RidgeConfig | Sequence[RidgeConfig],
    threads: int | None = 1,
) -> LocalOptima:
    """Ridge-solve every dataset; cfg may be one config or one per dataset."""
    if isinstance(cfg, RidgeConfig):
        configs = [cfg] * fed.n_datasets
    else:
        configs = list(cfg)
        if len(configs) != fed.n_datasets:
            raise DimensionError("One ridge config per dataset is required", expected=fed.n_datasets, got=len(configs))

    thetas = run_cells(
        lambda pair: ridge_solve(pair[0].U, pair[0].Y, pair[1]),
        list(zip(fed.datasets, configs)),
        threads,
    )
    return LocalOptima(thetas=tuple(thetas))


def scores(fed: Federation, optima: LocalOptima) -> np.ndarray:
    """Mean squared error of every theta*_i on the main dataset."""
    if optima.n_datasets != fed.n_datasets or optima.feature_dim != fed.feature_dim:
        raise DimensionError(
            "Optima do not belong to this federation",
            expected=(fed.n_datasets, fed.feature_dim),
            got=(optima.n_datasets, optima.feature_dim),
        )
    main = fed.main
    residuals = main.U @ optima.matrix.T - main.Y[:, None]
    return np.mean(residuals ** 2, axis=0)


# =============================================================================
# Weights
# =============================================================================

def _clamp(scores_: np.ndarray, eta: float) -> np.ndarray:
    if not eta > 0.0:
        raise ValueError(f"eta must be positive, got {eta}")
    s = np.asarray(scores_, dtype=float).reshape(-1)
    if s.size == 0:
        raise DimensionError("At least one score is required", got=0)
    return np.maximum(s[0] + eta - s, 0.0)


def prior_weights(scores_: np.ndarray, eta: float) -> np.ndarray:
    """w_i proportional to [s^1 + eta - s^i]_+; the main dataset always contributes eta."""
    clamp = _clamp(scores_, eta)
    return clamp / clamp.sum()


def posterior_weights(scores_: np.ndarray, eta: float, exponent_sign: int = -1) -> np.ndarray:
    """
    Closed-form minimizer of kl_objective over the simplex:
    w*_i proportional to exp(-s^i/eta) [s^1 + eta - s^i]_+.

    exponent_sign=+1 evaluates the positively tilted variant
    exp(+s^i/eta) [s^1 + eta - s^i]_+ instead. Exponents are shifted by their
    maximum over the support before exponentiating.
    """
    if exponent_sign not in (-1, 1):
        raise ValueError(f"exponent_sign must be -1 or +1, got {exponent_sign}")
    s = np.asarray(scores_, dtype=float).reshape(-1)
    clamp = _clamp(s, eta)
    support = clamp > 0.0

    exponents = np.full(s.shape, -np.inf)
    exponents[support] = exponent_sign * s[support] / eta
    exponents -= exponents[support].max()

    weights = np.zeros_like(s)
    weights[support] = np.exp(exponents[support]) * clamp[support]
    return weights / weights.sum()


def kl_objective(w: np.ndarray, scores_: np.ndarray, eta: float) -> float:
    """
    Expected score under w plus eta times KL(w || prior).

    Returns +inf when w puts mass outside the prior's support.
    """
    w = np.asarray(w, dtype=float).reshape(-1)
    s = np.asarray(scores_, dtype=float).reshape(-1)
    if w.shape != s.shape:
        raise DimensionError("Weights and scores differ in length", expected=s.shape, got=w.shape)
    clamp = _clamp(s, eta)
    if np.any((w > 0.0) & (clamp <= 0.0)):
        return float("inf")

    total = clamp.sum()
    active = w > 0.0
    kl = float(np.sum(w[active] * np.log(w[active] * total / clamp[active])))
    return float(w @ s) + eta * kl


def share(
    fed: Federation,
    cfg: RidgeConfig | Sequence[RidgeConfig],
    eta: float,
    exponent_sign: int = -1,
    threads: int | None = 1,
) -> tuple[LocalOptima, SharingResult]:
    """Local optima, scores, prior and posterior in one pass."""
    optima = local_optima(fed, cfg, threads=threads)
    s = scores(fed, optima)
    prior = prior_weights(s, eta)
    posterior = posterior_weights(s, eta, exponent_sign=exponent_sign)
    logger.debug(f"share: N={fed.n_datasets}, eta={eta}, support={int(np.count_nonzero(prior))}")
    return optima, SharingResult(scores=s, prior=prior, posterior=posterior, eta=eta, exponent_sign=exponent_sign)


__all__ = [
    "LocalOptima",
    "SharingResult",
    "local_optima",
    "scores",
    "prior_weights",
    "posterior_weights",
    "kl_objective",
    "share",
]
