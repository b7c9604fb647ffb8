"""
fedregret - Accelerated Symmetric Training
Uniform-weight variant of the regret-optimal algorithm. With w_i = 1/N and the
anchor Theta*_(N), every Riccati matrix is block Toeplitz with one diagonal
block pi1 and one off-diagonal block pi2, and S has identical blocks pi3. All
recursions then run in dimension p instead of Np.

Two representations of the p x p blocks are supported:

    matrix    full p x p arrays, following the recursion literally
    diagonal  eigenvalues in the eigenbasis of the terminal Gram matrix, which
              every pi1, pi2, gamma1, gamma2 shares
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
import scipy.linalg as sla

from data import Federation, federation_from_arrays
from exceptions import DimensionError, SingularityError
from features import RidgeConfig
from logging_config import get_logger, log_operation
from regret import (
    RegretConfig,
    Trajectory,
    backward_riccati,
    energy,
    forward_rollout,
    terminal_conditions,
)
from sharing import LocalOptima, local_optima

logger = get_logger(__name__)

Representation = Literal["auto", "matrix", "diagonal"]


# =============================================================================
# Types
# =============================================================================

@dataclass(frozen=True)
class SymmetricTerminal:
    pi1_T: np.ndarray
    pi2_T: np.ndarray
    pi3_T: np.ndarray
    n_datasets: int


@dataclass
class SymmetricTape:
    """
    pi1, pi2, gamma1, gamma2 are (T+1, p, p) in the matrix representation and
    (T+1, p) eigenvalue arrays in the diagonal one; pi3 is always (T+1, p).
    gamma(t) is cached for t = 1..T.
    """

    cfg: RegretConfig
    n_datasets: int
    theta_mean: np.ndarray
    pi1: np.ndarray
    pi2: np.ndarray
    pi3: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    basis: np.ndarray | None = None

    @property
    def representation(self) -> str:
        return "diagonal" if self.basis is not None else "matrix"

    @property
    def feature_dim(self) -> int:
        return int(self.pi3.shape[1])

    @property
    def horizon(self) -> int:
        return self.cfg.horizon

    def block(self, name: str, t: int) -> np.ndarray:
        """A p x p block (pi1, pi2, gamma1 or gamma2) at time t in original coordinates."""
        values = getattr(self, name)[t]
        if self.basis is None:
            return values
        return (self.basis * values) @ self.basis.T


# =============================================================================
# Block Algebra
# =============================================================================

def _apply(block: np.ndarray, X: np.ndarray, basis: np.ndarray | None) -> np.ndarray:
    """Apply a p x p block to each row of X (or to a single vector)."""
    if basis is None:
        return X @ block.T
    return ((X @ basis) * block) @ basis.T


def _mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a * b if a.ndim == 1 else a @ b


def _eye_like(a: np.ndarray) -> np.ndarray:
    return np.ones_like(a) if a.ndim == 1 else np.eye(a.shape[0])


def reconstruct_full(pi1: np.ndarray, pi2: np.ndarray, pi3: np.ndarray, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Np x Np block Toeplitz P_hat and stacked S_hat from the p-dimensional blocks."""
    pi1 = np.atleast_2d(pi1)
    pi2 = np.atleast_2d(pi2)
    P_hat = np.kron(np.eye(N), pi1 - pi2) + np.kron(np.ones((N, N)), pi2)
    return P_hat, np.tile(np.asarray(pi3, dtype=float).reshape(-1), N)


# =============================================================================
# Recursions
# =============================================================================

def sym_terminal(fed: Federation) -> SymmetricTerminal:
    """pi1(T) = pi2(T) = (1/N^3) sum u u^T and pi3(T) = -(1/N^2) sum u y over all datasets."""
    N = fed.n_datasets
    gram = sum(ds.U.T @ ds.U for ds in fed.datasets)
    cross = sum(ds.U.T @ ds.Y for ds in fed.datasets)
    pi1 = (gram + gram.T) / (2.0 * N ** 3)
    return SymmetricTerminal(pi1_T=pi1, pi2_T=pi1.copy(), pi3_T=-cross / N ** 2, n_datasets=N)


def gamma_maps(
    pi1: np.ndarray,
    pi2: np.ndarray,
    cfg: RegretConfig,
    N: int,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Diagonal and off-diagonal blocks of [(lam+beta)I + P_hat]^{-1}:

        gamma1 = {(lam+beta)I + pi1 - (N-1) pi2 D^{-1} pi2}^{-1}
        gamma2 = -gamma1 pi2 D^{-1},   D = (lam+beta)I + pi1 + (N-2) pi2

    1-D inputs are treated as eigenvalues of commuting blocks.
    """
    shift = cfg.shift
    if pi1.ndim == 1:
        D = shift + pi1 + (N - 2) * pi2
        M = shift + pi1 - (N - 1) * pi2 ** 2 / D
        if np.any(D == 0.0) or np.any(M == 0.0):
            raise SingularityError("gamma map denominator vanished", module="accelerated")
        gamma1 = 1.0 / M
        gamma2 = -gamma1 * pi2 / D
    else:
        eye = np.eye(pi1.shape[0])
        D = shift * eye + pi1 + (N - 2) * pi2
        try:
            # pi2 D^{-1}
            right = sla.solve(D.T, pi2.T, check_finite=False).T
            M = shift * eye + pi1 - (N - 1) * right @ pi2
            gamma1 = sla.solve(M, eye, check_finite=False)
        except (np.linalg.LinAlgError, ValueError) as e:
            raise SingularityError("gamma map block is singular", module="accelerated", cause=e) from e
        gamma2 = -gamma1 @ right
        gamma1 = (gamma1 + gamma1.T) / 2.0
        gamma2 = (gamma2 + gamma2.T) / 2.0
    if not (np.all(np.isfinite(gamma1)) and np.all(np.isfinite(gamma2))):
        raise SingularityError("gamma maps are not finite", module="accelerated")
    return gamma1, gamma2


def select_representation(representation: Representation, cfg: RegretConfig, p: int) -> str:
    if representation != "auto":
        return representation
    return "matrix" if (cfg.horizon + 1) * p * p <= cfg.memory_budget else "diagonal"


def sym_backward(
    terminal: SymmetricTerminal,
    cfg: RegretConfig,
    N: int,
    theta_mean: np.ndarray,
    representation: Representation = "auto",
) -> SymmetricTape:
    """
    pi1(t) = beta I - beta^2 gamma1(t+1)
    pi2(t) = -beta^2 gamma2(t+1)
    pi3(t) = beta [gamma1(t+1) + (N-1) gamma2(t+1)] (pi3(t+1) - lam theta*_(N))
    """
    p = terminal.pi3_T.shape[0]
    theta_mean = np.asarray(theta_mean, dtype=float)
    if theta_mean.shape != (p,):
        raise DimensionError("theta_mean has the wrong length", expected=p, got=theta_mean.shape)
    T = cfg.horizon
    beta = cfg.beta
    mode = select_representation(representation, cfg, p)

    basis = None
    if mode == "diagonal":
        eigvals, basis = np.linalg.eigh(terminal.pi1_T)
        pi1_T = np.maximum(eigvals, 0.0)
        pi2_T = pi1_T.copy()
        block_shape: tuple[int, ...] = (T + 1, p)
    else:
        pi1_T, pi2_T = terminal.pi1_T, terminal.pi2_T
        block_shape = (T + 1, p, p)

    pi1 = np.zeros(block_shape)
    pi2 = np.zeros(block_shape)
    gamma1 = np.zeros(block_shape)
    gamma2 = np.zeros(block_shape)
    pi3 = np.zeros((T + 1, p))
    pi1[T], pi2[T], pi3[T] = pi1_T, pi2_T, terminal.pi3_T

    for t in range(T - 1, -1, -1):
        g1, g2 = gamma_maps(pi1[t + 1], pi2[t + 1], cfg, N)
        gamma1[t + 1], gamma2[t + 1] = g1, g2
        pi1[t] = beta * _eye_like(g1) - beta ** 2 * g1
        pi2[t] = -beta ** 2 * g2
        pi3[t] = beta * _apply(g1 + (N - 1) * g2, pi3[t + 1] - cfg.lam * theta_mean, basis)

    logger.debug(f"sym_backward: representation={mode}, N={N}, p={p}, T={T}")
    return SymmetricTape(
        cfg=cfg,
        n_datasets=N,
        theta_mean=theta_mean.copy(),
        pi1=pi1,
        pi2=pi2,
        pi3=pi3,
        gamma1=gamma1,
        gamma2=gamma2,
        basis=basis,
    )


def helper_alpha(
    theta_i: np.ndarray,
    theta_sum: np.ndarray,
    gammas: tuple[np.ndarray, np.ndarray],
    pis: tuple[np.ndarray, np.ndarray, np.ndarray],
    cfg: RegretConfig,
    N: int,
    theta_mean: np.ndarray,
    basis: np.ndarray | None = None,
) -> np.ndarray:
    """
    Per-agent increment

        -(g1 - g2)(lam I + pi1 - pi2) theta_i
        - {g1 pi2 + g2 [lam I + pi1 + (N-2) pi2]} theta_sum
        - [g1 + (N-1) g2](pi3 - lam theta_mean)

    theta_i may hold one agent (p,) or all agents as rows (N, p).
    """
    g1, g2 = gammas
    pi1, pi2, pi3 = pis
    lam = cfg.lam
    eye = _eye_like(pi1)

    own = _mul(g1 - g2, lam * eye + pi1 - pi2)
    shared = _mul(g1, pi2) + _mul(g2, lam * eye + pi1 + (N - 2) * pi2)
    drive = _apply(g1 + (N - 1) * g2, pi3 - lam * theta_mean, basis)
    return -_apply(own, theta_i, basis) - _apply(shared, theta_sum, basis) - drive


def accelerated_rollout(
    optima: LocalOptima,
    tape: SymmetricTape,
    cfg: RegretConfig,
    start: np.ndarray | None = None,
) -> Trajectory:
    """Roll every agent forward with helper_alpha; Theta(0) defaults to Theta*."""
    N, p = tape.n_datasets, tape.feature_dim
    if optima.n_datasets != N or optima.feature_dim != p:
        raise DimensionError("Optima do not match the symmetric tape", expected=(N, p), got=(optima.n_datasets, optima.feature_dim))
    state = np.array(optima.stacked if start is None else start, dtype=float)
    if state.shape != (N * p,):
        raise DimensionError("Start state has the wrong length", expected=N * p, got=state.shape)

    T = cfg.horizon
    states = np.empty((T + 1, N * p))
    controls = np.empty((T, N * p))
    states[0] = state
    for t in range(T):
        agents = states[t].reshape(N, p)
        theta_sum = agents.sum(axis=0)
        step = helper_alpha(
            agents,
            theta_sum,
            (tape.gamma1[t + 1], tape.gamma2[t + 1]),
            (tape.pi1[t + 1], tape.pi2[t + 1], tape.pi3[t + 1]),
            cfg,
            N,
            tape.theta_mean,
            tape.basis,
        )
        controls[t] = step.ravel()
        states[t + 1] = states[t] + controls[t]
    return Trajectory(states=states, controls=controls, n_datasets=N, provenance="accelerated")


def accelerated_regret_optimal(
    fed: Federation,
    optima: LocalOptima,
    cfg: RegretConfig,
    start: np.ndarray | None = None,
    representation: Representation = "auto",
) -> tuple[Trajectory, SymmetricTape]:
    """Symmetric terminal, backward pass and rollout in one call."""
    tape = sym_backward(sym_terminal(fed), cfg, fed.n_datasets, optima.mean_theta, representation)
    return accelerated_rollout(optima, tape, cfg, start=start), tape


# =============================================================================
# Diagnostics
# =============================================================================

def homotopy_gaps(
    fed: Federation,
    optima: LocalOptima,
    w_star: np.ndarray,
    cfg: RegretConfig,
    s_grid: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 1.0),
) -> np.ndarray:
    """
    Uniform-energy excess of the RO trajectory for w(s) = (1-s) w* + s/N over ARO.

    Both runs start and are anchored at Theta*_(N) and are scored with the same
    uniform-weight energy, so every entry is non-negative up to round-off and
    the last one vanishes when s_grid ends at 1. The sequence is not monotone
    in general: the terminal loss is not affine in w.
    """
    N = fed.n_datasets
    uniform = np.full(N, 1.0 / N)
    anchor = optima.stacked_mean
    aro, _ = accelerated_regret_optimal(fed, optima, cfg, start=anchor)
    target = energy(aro, cfg, uniform, fed, anchor)

    gaps = []
    for s in s_grid:
        w_s = (1.0 - s) * np.asarray(w_star, dtype=float) + s * uniform
        tape = backward_riccati(terminal_conditions(fed, w_s), cfg, anchor)
        traj = forward_rollout(optima, tape, cfg, start=anchor)
        gaps.append(energy(traj, cfg, uniform, fed, anchor) - target)
    return np.asarray(gaps)


@dataclass(frozen=True)
class BenchRow:
    n_datasets: int
    feature_dim: int
    horizon: int
    t_ro: float
    t_aro: float

    @property
    def ratio(self) -> float:
        return self.t_ro / self.t_aro if self.t_aro > 0 else float("inf")


def _best_time(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def benchmark(
    N_list: Sequence[int],
    p: int,
    T: int,
    seed: int,
    repeats: int = 3,
    lam: float = 1.0,
    beta: float = 1.0,
) -> list[BenchRow]:
    """
    Wall-clock time of the dense regret-optimal pass versus the accelerated
    matrix pass on random federations of growing N.
    """
    cfg_ro = RegretConfig(lam=lam, beta=beta, horizon=T, backend="dense")
    rows = []
    for N in N_list:
        rng = np.random.default_rng([seed, N])
        U_list = [rng.standard_normal((2 * p, p)) / np.sqrt(p) for _ in range(N)]
        Y_list = [rng.standard_normal(2 * p) for _ in range(N)]
        fed = federation_from_arrays(U_list, Y_list)
        optima = local_optima(fed, RidgeConfig(kappa=1.0))
        uniform = np.full(N, 1.0 / N)
        anchor = optima.stacked_mean

        def run_ro() -> None:
            tape = backward_riccati(terminal_conditions(fed, uniform), cfg_ro, anchor)
            forward_rollout(optima, tape, cfg_ro, start=optima.stacked)

        def run_aro() -> None:
            accelerated_regret_optimal(fed, optima, cfg_ro, representation="matrix")

        row = BenchRow(
            n_datasets=N,
            feature_dim=p,
            horizon=T,
            t_ro=_best_time(run_ro, repeats),
            t_aro=_best_time(run_aro, repeats),
        )
        log_operation(logger, "benchmark", True, {"N": N, "t_ro": f"{row.t_ro:.4f}", "t_aro": f"{row.t_aro:.4f}"})
        rows.append(row)
    return rows


__all__ = [
    "SymmetricTerminal",
    "SymmetricTape",
    "BenchRow",
    "reconstruct_full",
    "sym_terminal",
    "gamma_maps",
    "select_representation",
    "sym_backward",
    "helper_alpha",
    "accelerated_rollout",
    "accelerated_regret_optimal",
    "homotopy_gaps",
    "benchmark",
]
