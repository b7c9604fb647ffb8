"""
fedregret - Random Feature Maps
Frozen one-hidden-layer ReLU feature maps and closed-form finite-rank kernel
ridge regression on top of them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from exceptions import DimensionError, FactorizationError, NumericalError
from logging_config import get_logger

logger = get_logger(__name__)


# =============================================================================
# Types
# =============================================================================

@dataclass(frozen=True)
class FeatureMap:
    """
    A frozen random hidden layer phi(x) = ReLU(A x + b), optionally followed by
    a constant 1 feature.
    """

    input_dim: int
    hidden_width: int
    hidden_weights: np.ndarray
    hidden_bias: np.ndarray
    include_constant: bool = False
    seed: int = 0
    weight_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.input_dim < 1 or self.hidden_width < 1:
            raise DimensionError(
                "Feature map dimensions must be positive",
                got=(self.input_dim, self.hidden_width),
            )
        weights = np.array(self.hidden_weights, dtype=float)
        bias = np.array(self.hidden_bias, dtype=float).reshape(-1)
        if weights.shape != (self.hidden_width, self.input_dim):
            raise DimensionError(
                "hidden_weights has the wrong shape",
                expected=(self.hidden_width, self.input_dim),
                got=weights.shape,
            )
        if bias.shape != (self.hidden_width,):
            raise DimensionError(
                "hidden_bias has the wrong shape",
                expected=(self.hidden_width,),
                got=bias.shape,
            )
        weights.setflags(write=False)
        bias.setflags(write=False)
        object.__setattr__(self, "hidden_weights", weights)
        object.__setattr__(self, "hidden_bias", bias)

    @property
    def output_dim(self) -> int:
        """Feature dimension p."""
        return self.hidden_width + (1 if self.include_constant else 0)

    def to_dict(self) -> dict[str, object]:
        """Parameters sufficient to rebuild the map with build_feature_map."""
        return {
            "d": self.input_dim,
            "hidden_width": self.hidden_width,
            "p": self.output_dim,
            "seed": self.seed,
            "weight_scale": self.weight_scale,
            "include_constant": self.include_constant,
        }


@dataclass(frozen=True)
class ParamVector:
    """Model weights theta of a finite-rank kernel ridge regressor."""

    values: np.ndarray
    min_norm: bool = False

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float).reshape(-1)
        if not np.all(np.isfinite(values)):
            raise NumericalError("Parameter vector has non-finite entries", module="features")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class RidgeConfig:
    """Ridge coefficient kappa."""

    kappa: float = 0.0

    def __post_init__(self) -> None:
        if not (self.kappa >= 0.0 and math.isfinite(self.kappa)):
            raise ValueError(f"kappa must be a finite non-negative number, got {self.kappa}")


# =============================================================================
# Feature Maps
# =============================================================================

def build_feature_map(
    d: int,
    hidden_width: int,
    seed: int,
    weight_scale: float | None = None,
    include_constant: bool = False,
) -> FeatureMap:
    """
    Draw a random hidden layer.

    Weights and biases are i.i.d. standard normal times weight_scale, which
    defaults to 1/sqrt(d).
    """
    if d < 1 or hidden_width < 1:
        raise DimensionError("Feature map dimensions must be positive", got=(d, hidden_width))
    scale = 1.0 / math.sqrt(d) if weight_scale is None else float(weight_scale)
    rng = np.random.default_rng(seed)
    weights = rng.standard_normal((hidden_width, d)) * scale
    bias = rng.standard_normal(hidden_width) * scale
    return FeatureMap(
        input_dim=d,
        hidden_width=hidden_width,
        hidden_weights=weights,
        hidden_bias=bias,
        include_constant=include_constant,
        seed=seed,
        weight_scale=scale,
    )


def featurize(feature_map: FeatureMap, X: np.ndarray) -> np.ndarray:
    """Apply phi row-wise: returns the n x p feature matrix U."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != feature_map.input_dim:
        raise DimensionError(
            "Input has the wrong number of columns",
            expected=feature_map.input_dim,
            got=X.shape,
        )
    hidden = np.maximum(X @ feature_map.hidden_weights.T + feature_map.hidden_bias, 0.0)
    if feature_map.include_constant:
        hidden = np.hstack([hidden, np.ones((X.shape[0], 1))])
    return hidden


# =============================================================================
# Ridge Regression
# =============================================================================

def _as_vector(theta: ParamVector | np.ndarray) -> np.ndarray:
    if isinstance(theta, ParamVector):
        return theta.values
    return np.asarray(theta, dtype=float).reshape(-1)


def _check_design(U: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    U = np.asarray(U, dtype=float)
    Y = np.asarray(Y, dtype=float).reshape(-1)
    if U.ndim != 2:
        raise DimensionError("Feature matrix must be 2-D", got=U.shape)
    if U.shape[0] != Y.shape[0]:
        raise DimensionError("Row counts of U and Y differ", expected=U.shape[0], got=Y.shape[0])
    if U.shape[0] < 1:
        raise DimensionError("At least one sample is required", got=U.shape)
    return U, Y


def ridge_solve(U: np.ndarray, Y: np.ndarray, cfg: RidgeConfig) -> ParamVector:
    """
    Solve (U^T U + kappa I) theta = U^T Y.

    kappa > 0 uses a Cholesky factorization of the normal matrix. kappa = 0 uses
    an SVD-based least-squares solve, which returns the minimum-norm solution
    when U is rank deficient; that case is flagged via ParamVector.min_norm.
    """
    U, Y = _check_design(U, Y)
    p = U.shape[1]

    if cfg.kappa > 0.0:
        normal = U.T @ U
        normal[np.diag_indices(p)] += cfg.kappa
        try:
            factor = sla.cho_factor(normal, lower=True, check_finite=False)
        except np.linalg.LinAlgError as e:
            raise FactorizationError(
                "Ridge normal matrix is not positive definite",
                module="features",
                cause=e,
            ) from e
        theta = sla.cho_solve(factor, U.T @ Y, check_finite=False)
        return ParamVector(theta)

    theta, _, rank, _ = sla.lstsq(U, Y, lapack_driver="gelsd", check_finite=False)
    min_norm = int(rank) < p
    if min_norm:
        logger.debug(f"ridge_solve: rank {rank} < p={p}, returning min-norm solution")
    return ParamVector(theta, min_norm=min_norm)


def predict(theta: ParamVector | np.ndarray, U: np.ndarray) -> np.ndarray:
    """Evaluate f_theta on featurized rows: U theta."""
    values = _as_vector(theta)
    U = np.asarray(U, dtype=float)
    if U.ndim != 2 or U.shape[1] != values.shape[0]:
        raise DimensionError("theta does not match feature dimension", expected=values.shape[0], got=U.shape)
    return U @ values


def sse(theta: ParamVector | np.ndarray, U: np.ndarray, Y: np.ndarray) -> float:
    """Sum of squared errors of f_theta on (U, Y)."""
    U, Y = _check_design(U, Y)
    residual = predict(theta, U) - Y
    return float(residual @ residual)


def objective(theta: ParamVector | np.ndarray, U: np.ndarray, Y: np.ndarray, kappa: float) -> float:
    """Penalized objective SSE + kappa * ||theta||^2."""
    values = _as_vector(theta)
    return sse(values, U, Y) + float(kappa) * float(values @ values)


__all__ = [
    "FeatureMap",
    "ParamVector",
    "RidgeConfig",
    "build_feature_map",
    "featurize",
    "ridge_solve",
    "predict",
    "sse",
    "objective",
]
