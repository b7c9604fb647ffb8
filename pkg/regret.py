"""
fedregret - Regret-Optimal Training
Backward Riccati system, forward regret-optimal rollout, loss / energy /
regret metrics, the value-function cost, a dense QP oracle and the plain
gradient-descent baseline.

The state is the stacked parameter vector Theta = (theta_1, ..., theta_N) in
R^{Np}; the control alpha(t) is its increment. The Riccati matrices are kept
behind a tape interface with two backends:

    dense     stores every P(t) and the Cholesky factor of (lambda+beta)I + P(t)
    spectral  stores eigenvalue sequences in the common eigenbasis of all P(t)

Both expose solve(t, v) = [(lambda+beta)I + P(t)]^{-1} v.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterator, Literal

import numpy as np
import scipy.linalg as sla

from data import Federation
from exceptions import DimensionError, DivergenceError, FactorizationError, InstanceTooLargeError
from logging_config import get_logger
from sharing import LocalOptima

logger = get_logger(__name__)

Backend = Literal["auto", "dense", "spectral"]
Provenance = Literal["regret_optimal", "accelerated", "gradient_descent", "oracle", "custom"]

QP_ORACLE_LIMIT = 600
DENSE_MEMORY_BUDGET = 2e7
DIVERGENCE_THRESHOLD = 1e12


# =============================================================================
# Types
# =============================================================================

@dataclass(frozen=True)
class RegretConfig:
    """Preference strength lam, stability beta and horizon T."""

    lam: float = 0.0
    beta: float = 1.0
    horizon: int = 1
    backend: Backend = "auto"
    memory_budget: float = DENSE_MEMORY_BUDGET

    def __post_init__(self) -> None:
        if not self.beta > 0.0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.lam >= 0.0:
            raise ValueError(f"lam must be non-negative, got {self.lam}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be at least 1, got {self.horizon}")
        if self.backend not in ("auto", "dense", "spectral"):
            raise ValueError(f"Unknown Riccati backend: {self.backend}")

    @property
    def shift(self) -> float:
        """lam + beta, the diagonal shift of every resolvent."""
        return self.lam + self.beta


@dataclass(frozen=True)
class Trajectory:
    """States Theta(0..T) and controls alpha(0..T-1) with Theta(t+1) = Theta(t) + alpha(t)."""

    states: np.ndarray
    controls: np.ndarray
    n_datasets: int
    provenance: Provenance = "custom"

    def __post_init__(self) -> None:
        states = np.asarray(self.states, dtype=float)
        controls = np.asarray(self.controls, dtype=float)
        if states.ndim != 2 or controls.ndim != 2:
            raise DimensionError("states and controls must be 2-D", got=(states.shape, controls.shape))
        if controls.shape != (states.shape[0] - 1, states.shape[1]):
            raise DimensionError(
                "controls must have one row fewer than states",
                expected=(states.shape[0] - 1, states.shape[1]),
                got=controls.shape,
            )
        if states.shape[1] % self.n_datasets:
            raise DimensionError("State dimension is not a multiple of N", expected=self.n_datasets, got=states.shape[1])
        states.setflags(write=False)
        controls.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "controls", controls)

    @classmethod
    def from_controls(
        cls,
        start: np.ndarray,
        controls: np.ndarray,
        n_datasets: int,
        provenance: Provenance = "custom",
    ) -> Trajectory:
        """Accumulate controls from a start state."""
        controls = np.asarray(controls, dtype=float)
        states = np.empty((controls.shape[0] + 1, controls.shape[1]))
        states[0] = start
        for t in range(controls.shape[0]):
            states[t + 1] = states[t] + controls[t]
        return cls(states=states, controls=controls, n_datasets=n_datasets, provenance=provenance)

    @property
    def horizon(self) -> int:
        return int(self.controls.shape[0])

    @property
    def feature_dim(self) -> int:
        return int(self.states.shape[1] // self.n_datasets)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def blocks(self, t: int = -1) -> np.ndarray:
        """Theta(t) as an N x p array."""
        return self.states[t].reshape(self.n_datasets, self.feature_dim)

    def mixed(self, w: np.ndarray, t: int = -1) -> np.ndarray:
        """theta^w(t) = sum_i w_i theta_i(t)."""
        return np.asarray(w, dtype=float) @ self.blocks(t)


@dataclass(frozen=True)
class GradientDescentConfig:
    learning_rate: float
    steps: int
    divergence_threshold: float = DIVERGENCE_THRESHOLD

    def __post_init__(self) -> None:
        if not self.learning_rate > 0.0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.steps < 1:
            raise ValueError(f"steps must be at least 1, got {self.steps}")


@dataclass(frozen=True)
class TerminalConditions:
    """
    Terminal value function data. P(T) = (w w^T) (x) G and S(T) = -w (x) g are
    kept factored; P_T and S_T materialize them.
    """

    weights: np.ndarray
    gram: np.ndarray
    cross: np.ndarray
    r_T: float

    @property
    def n_datasets(self) -> int:
        return int(self.weights.shape[0])

    @property
    def feature_dim(self) -> int:
        return int(self.gram.shape[0])

    @property
    def P_T(self) -> np.ndarray:
        return np.kron(np.outer(self.weights, self.weights), self.gram)

    @property
    def S_T(self) -> np.ndarray:
        return -np.kron(self.weights, self.cross)


# =============================================================================
# Federation Moments
# =============================================================================

def _check_weights(w: np.ndarray, fed: Federation) -> np.ndarray:
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.shape[0] != fed.n_datasets:
        raise DimensionError("Weight vector length differs from N", expected=fed.n_datasets, got=w.shape[0])
    return w


def _check_stacked(theta_stacked: np.ndarray, fed: Federation) -> np.ndarray:
    theta = np.asarray(theta_stacked, dtype=float)
    expected = fed.n_datasets * fed.feature_dim
    if theta.shape[-1] != expected:
        raise DimensionError("Stacked parameter has the wrong length", expected=expected, got=theta.shape)
    return theta


def _weighted_moments(fed: Federation, w: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """G = sum w_i U_i^T U_i, g = sum w_i U_i^T Y_i, r = sum w_i |Y_i|^2."""
    p = fed.feature_dim
    gram = np.zeros((p, p))
    cross = np.zeros(p)
    energy = 0.0
    for wi, ds in zip(w, fed.datasets):
        if wi == 0.0:
            continue
        gram += wi * (ds.U.T @ ds.U)
        cross += wi * (ds.U.T @ ds.Y)
        energy += wi * float(ds.Y @ ds.Y)
    return (gram + gram.T) / 2.0, cross, energy


# =============================================================================
# Loss, Energy and Regret
# =============================================================================

def _mixed_losses(mixed: np.ndarray, w: np.ndarray, fed: Federation) -> np.ndarray:
    """Cooperative loss for each row of a (k, p) array of mixed parameters."""
    total = np.zeros(mixed.shape[0])
    for wi, ds in zip(w, fed.datasets):
        if wi == 0.0:
            continue
        residual = ds.U @ mixed.T - ds.Y[:, None]
        total += wi * np.einsum("ij,ij->j", residual, residual)
    return total


def loss(theta_stacked: np.ndarray, w: np.ndarray, fed: Federation) -> float:
    """l(Theta, w; D) = sum_i w_i |U_i theta^w - Y_i|^2 with theta^w = sum_i w_i theta_i."""
    w = _check_weights(w, fed)
    theta = _check_stacked(theta_stacked, fed).reshape(fed.n_datasets, fed.feature_dim)
    return float(_mixed_losses((w @ theta)[None, :], w, fed)[0])


def loss_gradient(theta_stacked: np.ndarray, w: np.ndarray, fed: Federation) -> np.ndarray:
    """Block k of the gradient is 2 w_k sum_i w_i U_i^T (U_i theta^w - Y_i)."""
    w = _check_weights(w, fed)
    theta = _check_stacked(theta_stacked, fed).reshape(fed.n_datasets, fed.feature_dim)
    mixed = w @ theta
    core = np.zeros(fed.feature_dim)
    for wi, ds in zip(w, fed.datasets):
        if wi == 0.0:
            continue
        core += wi * (ds.U.T @ (ds.U @ mixed - ds.Y))
    return 2.0 * np.kron(w, core)


def ideal_loss(w: np.ndarray, fed: Federation) -> float:
    """
    l* = min over Theta of l(Theta, w; D).

    The loss only sees theta^w, so this is a weighted least-squares problem in
    R^p, solved in min-norm form.
    """
    w = _check_weights(w, fed)
    rows = [math.sqrt(wi) * ds.U for wi, ds in zip(w, fed.datasets) if wi > 0.0]
    targets = [math.sqrt(wi) * ds.Y for wi, ds in zip(w, fed.datasets) if wi > 0.0]
    design = np.vstack(rows)
    theta, _, _, _ = sla.lstsq(design, np.concatenate(targets), lapack_driver="gelsd", check_finite=False)
    return float(_mixed_losses(theta[None, :], w, fed)[0])


def loss_curve(traj: Trajectory, w: np.ndarray, fed: Federation) -> np.ndarray:
    """l(Theta(t)) for t = 0..T."""
    w = _check_weights(w, fed)
    mixed = traj.states.reshape(traj.horizon + 1, fed.n_datasets, fed.feature_dim)
    return _mixed_losses(np.einsum("i,tip->tp", w, mixed), w, fed)


def _running_costs(traj: Trajectory, cfg: RegretConfig, anchor: np.ndarray) -> np.ndarray:
    deviation = traj.states[1:] - anchor
    return cfg.lam * np.einsum("ij,ij->i", deviation, deviation) + cfg.beta * np.einsum(
        "ij,ij->i", traj.controls, traj.controls
    )


def intermediate_energies(
    traj: Trajectory,
    cfg: RegretConfig,
    w: np.ndarray,
    fed: Federation,
    anchor: np.ndarray,
) -> np.ndarray:
    """Energy of every prefix: running cost over steps < t plus l(Theta(t)), for t = 0..T."""
    anchor = _check_stacked(anchor, fed)
    running = np.concatenate([[0.0], np.cumsum(_running_costs(traj, cfg, anchor))])
    return running + loss_curve(traj, w, fed)


def energy(
    traj: Trajectory,
    cfg: RegretConfig,
    w: np.ndarray,
    fed: Federation,
    anchor: np.ndarray,
) -> float:
    """Running costs lam |Theta(t+1) - anchor|^2 + beta |alpha(t)|^2 plus the terminal loss."""
    anchor = _check_stacked(anchor, fed)
    return float(_running_costs(traj, cfg, anchor).sum()) + loss(traj.final, w, fed)


def systemic_regret(
    traj: Trajectory,
    cfg: RegretConfig,
    w: np.ndarray,
    fed: Federation,
    anchor: np.ndarray,
) -> float:
    return energy(traj, cfg, w, fed, anchor) - ideal_loss(w, fed)


# =============================================================================
# Riccati Tapes
# =============================================================================

class RiccatiTape(ABC):
    """
    Backward Riccati data for t = 0..T.

    Attributes:
        S: (T+1, Np) array of S(t)
        r: (T+1,) array of r(t)
    """

    def __init__(self, cfg: RegretConfig, n_datasets: int, feature_dim: int, anchor: np.ndarray) -> None:
        self.cfg = cfg
        self.n_datasets = n_datasets
        self.feature_dim = feature_dim
        self.anchor = np.asarray(anchor, dtype=float).copy()
        self.anchor.setflags(write=False)
        dim = n_datasets * feature_dim
        self.S = np.zeros((cfg.horizon + 1, dim))
        self.r = np.zeros(cfg.horizon + 1)

    @property
    def horizon(self) -> int:
        return self.cfg.horizon

    @property
    def dim(self) -> int:
        return self.n_datasets * self.feature_dim

    @abstractmethod
    def P(self, t: int) -> np.ndarray:
        """Materialized P(t)."""

    @abstractmethod
    def solve(self, t: int, v: np.ndarray) -> np.ndarray:
        """[(lam+beta)I + P(t)]^{-1} v."""

    @abstractmethod
    def quadratic(self, t: int, x: np.ndarray) -> float:
        """x^T P(t) x."""

    @abstractmethod
    def control(self, t: int, theta: np.ndarray) -> np.ndarray:
        """Optimal increment alpha(t) from state Theta(t)."""

    def _step_affine(self, t: int) -> None:
        """Fill S(t), r(t) from step t+1; P(t) must already be available for t+1."""
        lam = self.cfg.lam
        drive = self.S[t + 1] - lam * self.anchor
        solved = self.solve(t + 1, drive)
        self.S[t] = self.cfg.beta * solved
        self.r[t] = -float(drive @ solved) + lam * float(self.anchor @ self.anchor) + self.r[t + 1]

    def value(self, t: int, x: np.ndarray) -> float:
        """V_t(x) = x^T P(t) x + 2 S(t)^T x + r(t)."""
        x = np.asarray(x, dtype=float)
        return self.quadratic(t, x) + 2.0 * float(self.S[t] @ x) + float(self.r[t])


class DenseRiccatiTape(RiccatiTape):
    """P(t) stored in full with the Cholesky factor of (lam+beta)I + P(t)."""

    def __init__(self, terminal: TerminalConditions, cfg: RegretConfig, anchor: np.ndarray) -> None:
        super().__init__(cfg, terminal.n_datasets, terminal.feature_dim, anchor)
        T = cfg.horizon
        self._P: list[np.ndarray | None] = [None] * (T + 1)
        self._factors: list[tuple[np.ndarray, bool] | None] = [None] * (T + 1)
        self._P[T] = terminal.P_T
        self.S[T] = terminal.S_T
        self.r[T] = terminal.r_T

        eye = np.eye(self.dim)
        for t in range(T - 1, -1, -1):
            self._factor(t + 1)
            inverse = sla.cho_solve(self._factors[t + 1], eye, check_finite=False)
            P_t = cfg.beta * eye - cfg.beta ** 2 * inverse
            self._P[t] = (P_t + P_t.T) / 2.0
            self._step_affine(t)

    def _factor(self, t: int) -> tuple[np.ndarray, bool]:
        if self._factors[t] is None:
            A = self._P[t] + self.cfg.shift * np.eye(self.dim)
            try:
                self._factors[t] = sla.cho_factor(A, lower=True, check_finite=False)
            except np.linalg.LinAlgError as e:
                raise FactorizationError(
                    f"(lam+beta)I + P({t}) is not positive definite",
                    module="regret",
                    cause=e,
                ) from e
        return self._factors[t]

    def P(self, t: int) -> np.ndarray:
        return self._P[t]

    def solve(self, t: int, v: np.ndarray) -> np.ndarray:
        return sla.cho_solve(self._factor(t), v, check_finite=False)

    def quadratic(self, t: int, x: np.ndarray) -> float:
        return float(x @ self._P[t] @ x)

    def control(self, t: int, theta: np.ndarray) -> np.ndarray:
        # alpha = -[(lam+beta)I + P]^{-1} [(lam I + P) Theta - lam Theta* + S]
        P_next = self._P[t + 1]
        rhs = P_next @ theta + self.cfg.lam * (theta - self.anchor) + self.S[t + 1]
        return -self.solve(t + 1, rhs)


class SpectralRiccatiTape(RiccatiTape):
    """
    Every P(t) is diagonal in the orthonormal system B = w_hat (x) V, with V the
    eigenvectors of the weighted Gram core, plus one eigenvalue on the
    complement of range(B). The recursion then acts on eigenvalues alone:
    mu(t) = beta - beta^2 / (lam + beta + mu(t+1)).
    """

    def __init__(self, terminal: TerminalConditions, cfg: RegretConfig, anchor: np.ndarray) -> None:
        super().__init__(cfg, terminal.n_datasets, terminal.feature_dim, anchor)
        T = cfg.horizon
        w = terminal.weights
        norm_sq = float(w @ w)
        self.w_hat = w / math.sqrt(norm_sq)
        eigvals, self.basis = np.linalg.eigh(terminal.gram)

        self.mu_core = np.empty((T + 1, self.feature_dim))
        self.mu_perp = np.empty(T + 1)
        self.mu_core[T] = norm_sq * np.maximum(eigvals, 0.0)
        self.mu_perp[T] = 0.0
        self.S[T] = terminal.S_T
        self.r[T] = terminal.r_T

        beta = cfg.beta
        for t in range(T - 1, -1, -1):
            self.mu_core[t] = beta - beta ** 2 / (cfg.shift + self.mu_core[t + 1])
            self.mu_perp[t] = beta - beta ** 2 / (cfg.shift + self.mu_perp[t + 1])
            self._step_affine(t)

    def _coords(self, v: np.ndarray) -> np.ndarray:
        """B^T v."""
        return self.basis.T @ (self.w_hat @ v.reshape(self.n_datasets, self.feature_dim))

    def _lift(self, c: np.ndarray) -> np.ndarray:
        """B c."""
        return np.outer(self.w_hat, self.basis @ c).ravel()

    def P(self, t: int) -> np.ndarray:
        B = np.kron(self.w_hat[:, None], self.basis)
        return self.mu_perp[t] * np.eye(self.dim) + (B * (self.mu_core[t] - self.mu_perp[t])) @ B.T

    def solve(self, t: int, v: np.ndarray) -> np.ndarray:
        c = self._coords(v)
        shift = self.cfg.shift
        return (v - self._lift(c)) / (shift + self.mu_perp[t]) + self._lift(c / (shift + self.mu_core[t]))

    def quadratic(self, t: int, x: np.ndarray) -> float:
        c = self._coords(x)
        return self.mu_perp[t] * float(x @ x) + float(np.sum((self.mu_core[t] - self.mu_perp[t]) * c * c))

    def control(self, t: int, theta: np.ndarray) -> np.ndarray:
        # equivalent form: alpha = -Theta + A^{-1}(beta Theta + lam Theta* - S)
        rhs = self.cfg.beta * theta + self.cfg.lam * self.anchor - self.S[t + 1]
        return self.solve(t + 1, rhs) - theta


# =============================================================================
# Algorithm
# =============================================================================

def terminal_conditions(fed: Federation, w: np.ndarray) -> TerminalConditions:
    """Terminal Riccati data from the weighted Gram core, cross term and target energy."""
    w = _check_weights(w, fed)
    gram, cross, energy_ = _weighted_moments(fed, w)
    return TerminalConditions(weights=w.copy(), gram=gram, cross=cross, r_T=energy_)


def select_backend(cfg: RegretConfig, dim: int) -> Literal["dense", "spectral"]:
    if cfg.backend != "auto":
        return cfg.backend
    return "dense" if (cfg.horizon + 1) * dim * dim <= cfg.memory_budget else "spectral"


def backward_riccati(
    terminal: TerminalConditions,
    cfg: RegretConfig,
    anchor: np.ndarray,
) -> RiccatiTape:
    """
    Run the Riccati recursions from T down to 0.

    P(t) = beta I - beta^2 [(lam+beta)I + P(t+1)]^{-1}
    S(t) = beta [(lam+beta)I + P(t+1)]^{-1} (S(t+1) - lam Theta*)
    r(t) = -(S(t+1) - lam Theta*)^T [...]^{-1} (S(t+1) - lam Theta*) + lam |Theta*|^2 + r(t+1)
    """
    dim = terminal.n_datasets * terminal.feature_dim
    anchor = np.asarray(anchor, dtype=float)
    if anchor.shape != (dim,):
        raise DimensionError("Anchor has the wrong length", expected=dim, got=anchor.shape)

    backend = select_backend(cfg, dim)
    tape_cls = DenseRiccatiTape if backend == "dense" else SpectralRiccatiTape
    tape = tape_cls(terminal, cfg, anchor)
    logger.debug(f"backward_riccati: backend={backend}, Np={dim}, T={cfg.horizon}")
    return tape


def forward_rollout(
    optima: LocalOptima | None,
    tape: RiccatiTape,
    cfg: RegretConfig,
    start: np.ndarray | None = None,
) -> Trajectory:
    """
    Apply the optimal feedback control from Theta(0) for T steps.

    Theta(0) defaults to the tape's anchor, which is Theta* for the regret-optimal
    algorithm.
    """
    if cfg.horizon != tape.horizon:
        raise DimensionError("Horizon differs from the tape", expected=tape.horizon, got=cfg.horizon)
    if optima is not None and optima.n_datasets * optima.feature_dim != tape.dim:
        raise DimensionError("Optima do not match the tape", expected=tape.dim, got=optima.n_datasets * optima.feature_dim)
    state = np.array(tape.anchor if start is None else start, dtype=float)
    if state.shape != (tape.dim,):
        raise DimensionError("Start state has the wrong length", expected=tape.dim, got=state.shape)

    states = np.empty((cfg.horizon + 1, tape.dim))
    controls = np.empty((cfg.horizon, tape.dim))
    states[0] = state
    for t in range(cfg.horizon):
        controls[t] = tape.control(t, states[t])
        states[t + 1] = states[t] + controls[t]
    return Trajectory(states=states, controls=controls, n_datasets=tape.n_datasets, provenance="regret_optimal")


def cost_via_value_function(tape: RiccatiTape, start: np.ndarray | None = None) -> float:
    """Optimal cost V_0(Theta(0)) = Theta^T P(0) Theta + 2 S(0)^T Theta + r(0)."""
    x = tape.anchor if start is None else np.asarray(start, dtype=float)
    return tape.value(0, x)


def regret_optimal(
    fed: Federation,
    w: np.ndarray,
    optima: LocalOptima,
    cfg: RegretConfig,
    anchor: np.ndarray | None = None,
    start: np.ndarray | None = None,
) -> tuple[Trajectory, RiccatiTape]:
    """Terminal conditions, backward pass and forward rollout in one call."""
    anchor = optima.stacked if anchor is None else np.asarray(anchor, dtype=float)
    start = anchor if start is None else start
    tape = backward_riccati(terminal_conditions(fed, w), cfg, anchor)
    traj = forward_rollout(optima, tape, cfg, start=start)
    logger.debug(f"regret_optimal: N={fed.n_datasets}, p={fed.feature_dim}, T={cfg.horizon}")
    return traj, tape


# =============================================================================
# Oracles and Baselines
# =============================================================================

def qp_oracle(
    fed: Federation,
    w: np.ndarray,
    cfg: RegretConfig,
    anchor: np.ndarray,
    start: np.ndarray | None = None,
) -> Trajectory:
    """
    Minimize the energy directly as a quadratic in the stacked controls
    z = (alpha(0), ..., alpha(T-1)), using Theta(t+1) = Theta(0) + sum_{u<=t} alpha(u).
    """
    w = _check_weights(w, fed)
    dim = fed.n_datasets * fed.feature_dim
    T = cfg.horizon
    size = T * dim
    if size > QP_ORACLE_LIMIT:
        raise InstanceTooLargeError(size, QP_ORACLE_LIMIT)

    anchor = _check_stacked(anchor, fed)
    x0 = anchor if start is None else _check_stacked(start, fed)
    terminal = terminal_conditions(fed, w)
    P_T, S_T = terminal.P_T, terminal.S_T

    # row block t of C sums controls 0..t
    C = np.kron(np.tril(np.ones((T, T))), np.eye(dim))
    L_T = C[-dim:]
    hessian = cfg.lam * C.T @ C + cfg.beta * np.eye(size) + L_T.T @ P_T @ L_T
    linear = cfg.lam * C.T @ np.tile(x0 - anchor, T) + L_T.T @ (P_T @ x0 + S_T)
    try:
        z = sla.solve(hessian, -linear, assume_a="pos", check_finite=False)
    except np.linalg.LinAlgError as e:
        raise FactorizationError("QP oracle Hessian is not positive definite", module="regret", cause=e) from e
    return Trajectory.from_controls(x0, z.reshape(T, dim), fed.n_datasets, provenance="oracle")


def _gd_iterates(
    fed: Federation,
    w: np.ndarray,
    gd: GradientDescentConfig,
    start: np.ndarray,
) -> Iterator[tuple[int, np.ndarray, float]]:
    """
    Yield (t, Theta(t), l(Theta(t))) for t = 0..steps; the step alpha(t) taken
    after each yield is -lr * gradient.
    """
    state = np.array(start, dtype=float)
    for t in range(gd.steps + 1):
        current = loss(state, w, fed)
        if not math.isfinite(current) or current > gd.divergence_threshold:
            raise DivergenceError(
                f"loss {current:.3e} exceeds {gd.divergence_threshold:.0e} at lr={gd.learning_rate}",
                step=t,
                module="regret",
            )
        yield t, state, current
        if t < gd.steps:
            state = state - gd.learning_rate * loss_gradient(state, w, fed)


def gradient_descent(
    fed: Federation,
    w: np.ndarray,
    gd: GradientDescentConfig,
    start: np.ndarray,
) -> Trajectory:
    """Plain full-batch gradient descent on the cooperative loss."""
    w = _check_weights(w, fed)
    start = _check_stacked(start, fed)
    states = np.empty((gd.steps + 1, start.shape[0]))
    for t, state, _ in _gd_iterates(fed, w, gd, start):
        states[t] = state
    return Trajectory.from_controls(start, np.diff(states, axis=0), fed.n_datasets, provenance="gradient_descent")


def gradient_descent_trace(
    fed: Federation,
    w: np.ndarray,
    gd: GradientDescentConfig,
    start: np.ndarray,
    cfg: RegretConfig,
    anchor: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Loss and prefix energy at every iterate without storing the states.

    Returns two arrays of length steps+1.
    """
    w = _check_weights(w, fed)
    start = _check_stacked(start, fed)
    anchor = _check_stacked(anchor, fed)
    losses = np.empty(gd.steps + 1)
    energies = np.empty(gd.steps + 1)
    running = 0.0
    previous: np.ndarray | None = None
    for t, state, current in _gd_iterates(fed, w, gd, start):
        if previous is not None:
            step = state - previous
            deviation = state - anchor
            running += cfg.lam * float(deviation @ deviation) + cfg.beta * float(step @ step)
        losses[t] = current
        energies[t] = running + current
        previous = state
    return losses, energies


def first_deviation_index(traj: Trajectory, reference: np.ndarray, rel_tol: float = 0.01) -> int:
    """First t with |Theta(t) - reference| > rel_tol |reference|; T+1 when it never happens."""
    reference = np.asarray(reference, dtype=float)
    distances = np.linalg.norm(traj.states - reference, axis=1)
    exceeded = np.flatnonzero(distances > rel_tol * np.linalg.norm(reference))
    return int(exceeded[0]) if exceeded.size else traj.horizon + 1


__all__ = [
    "RegretConfig",
    "Trajectory",
    "GradientDescentConfig",
    "TerminalConditions",
    "RiccatiTape",
    "DenseRiccatiTape",
    "SpectralRiccatiTape",
    "loss",
    "loss_gradient",
    "ideal_loss",
    "loss_curve",
    "energy",
    "intermediate_energies",
    "systemic_regret",
    "terminal_conditions",
    "select_backend",
    "backward_riccati",
    "forward_rollout",
    "cost_via_value_function",
    "regret_optimal",
    "qp_oracle",
    "gradient_descent",
    "gradient_descent_trace",
    "first_deviation_index",
]
