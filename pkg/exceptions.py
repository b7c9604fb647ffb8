"""
fedregret - Custom Exception Hierarchy
Domain-specific exceptions for the federated regret-optimal toolkit.
"""

from __future__ import annotations

from typing import Any


class FedRegretError(Exception):
    """
    Base exception for all fedregret errors.

    Provides a consistent interface for error handling across the library and CLI.
    """

    def __init__(
        self,
        message: str,
        *,
        details: dict[str, Any] | None = None,
        cause: Exception | None = None,
    ) -> None:
        super().__init__(message)
        self.message = message
        self.details = details or {}
        self.cause = cause

    def __str__(self) -> str:
        if self.details:
            details_str = ", ".join(f"{k}={v}" for k, v in self.details.items())
            return f"{self.message} ({details_str})"
        return self.message


# =============================================================================
# Configuration Errors
# =============================================================================

class ConfigError(FedRegretError):
    """Configuration-related errors."""

    def __init__(
        self,
        message: str,
        config_key: str | None = None,
        line: int | None = None,
        **kwargs: Any,
    ) -> None:
        super().__init__(message, **kwargs)
        self.config_key = config_key
        self.line = line
        if config_key:
            self.details["config_key"] = config_key
        if line is not None:
            self.details["line"] = line


class ConfigValidationError(ConfigError):
    """Raised when a configuration value is out of range or malformed."""
    pass


class MissingConfigError(ConfigError):
    """Raised when a required configuration value or file is missing."""

    def __init__(self, config_key: str, **kwargs: Any) -> None:
        super().__init__(
            f"Required configuration missing: {config_key}",
            config_key=config_key,
            **kwargs,
        )


# =============================================================================
# Shape Errors
# =============================================================================

class DimensionError(FedRegretError):
    """Raised when array shapes do not agree."""

    def __init__(
        self,
        message: str,
        expected: Any = None,
        got: Any = None,
        **kwargs: Any,
    ) -> None:
        super().__init__(message, **kwargs)
        self.expected = expected
        self.got = got
        if expected is not None:
            self.details["expected"] = expected
        if got is not None:
            self.details["got"] = got


# =============================================================================
# Numerical Errors
# =============================================================================

class NumericalError(FedRegretError):
    """Base error for numerical failures; names the module that failed."""

    def __init__(
        self,
        message: str,
        module: str | None = None,
        **kwargs: Any,
    ) -> None:
        super().__init__(message, **kwargs)
        self.module = module
        if module:
            self.details["module"] = module


class FactorizationError(NumericalError):
    """Raised when a matrix expected to be positive definite fails to factor."""
    pass


class SingularityError(NumericalError):
    """Raised when a matrix expected to be invertible is singular."""
    pass


class DivergenceError(NumericalError):
    """Raised when an iterative method diverges."""

    def __init__(
        self,
        reason: str,
        step: int | None = None,
        **kwargs: Any,
    ) -> None:
        super().__init__(f"Iteration diverged: {reason}", **kwargs)
        self.step = step
        if step is not None:
            self.details["step"] = step


class InstanceTooLargeError(FedRegretError):
    """Raised when a brute-force routine is asked to solve an oversized instance."""

    def __init__(self, size: int, limit: int, **kwargs: Any) -> None:
        super().__init__(
            f"Instance too large for dense solve: {size} > {limit}",
            **kwargs,
        )
        self.size = size
        self.limit = limit


# =============================================================================
# Simulation and Pricing Errors
# =============================================================================

class SimulationError(FedRegretError):
    """Raised on invalid model parameters or discretization settings."""

    def __init__(
        self,
        message: str,
        parameter: str | None = None,
        **kwargs: Any,
    ) -> None:
        super().__init__(message, **kwargs)
        self.parameter = parameter
        if parameter:
            self.details["parameter"] = parameter


class PricingError(FedRegretError):
    """Raised on inconsistent path sets or degenerate evaluation statistics."""
    pass


# =============================================================================
# Data Errors
# =============================================================================

class DataFormatError(FedRegretError):
    """Raised when an on-disk federation or trace file is malformed."""

    def __init__(
        self,
        message: str,
        filepath: str | None = None,
        **kwargs: Any,
    ) -> None:
        super().__init__(message, **kwargs)
        self.filepath = filepath
        if filepath:
            self.details["filepath"] = filepath


# =============================================================================
# Exports
# =============================================================================

__all__ = [
    # Base
    "FedRegretError",
    # Config errors
    "ConfigError",
    "ConfigValidationError",
    "MissingConfigError",
    # Shape errors
    "DimensionError",
    # Numerical errors
    "NumericalError",
    "FactorizationError",
    "SingularityError",
    "DivergenceError",
    "InstanceTooLargeError",
    # Simulation / pricing
    "SimulationError",
    "PricingError",
    # Data
    "DataFormatError",
]
