"""
fedregret - Bermudan Pricing
Randomized least-squares Monte Carlo with a pluggable regression step: every
continuation regression can draw on the training paths of all datasets through
one of the federated optimizers (local, mean-local, joint, joint-subset,
regret-optimal, accelerated regret-optimal).
"""

from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Literal, Mapping, Sequence

import numpy as np
import pandas as pd

from accelerated import accelerated_regret_optimal
from config import PriceConfig, experiment1_preset, experiment2_preset
from data import federation_from_arrays
from exceptions import PricingError
from features import FeatureMap, RidgeConfig, build_feature_map, featurize, ridge_solve
from logging_config import get_logger, log_operation
from montecarlo import PAYOFFS, PathSet, dump_paths_csv, simulate
from regret import RegretConfig, regret_optimal
from sharing import share
from utils.parallel import child_seed, run_cells

logger = get_logger(__name__)

Kind = Literal["LO", "MLO", "JO", "JSO", "RO", "ARO"]

Z_975 = 1.959964

_TAG = re.compile(r"^(LO)-(\d+)$|^(MLO|JO)$|^(JSO):(\d+(?:\+\d+)*)$|^(RO|ARO):([0-9.eE+-]+)$")


# =============================================================================
# Types
# =============================================================================

@dataclass(frozen=True)
class OptimizerKind:
    """
    One regression optimizer. Dataset indices are 1-based; dataset 1 is the
    main dataset. eta, lam, beta and horizon only matter for RO and ARO.
    """

    kind: Kind
    index: int | None = None
    subset: tuple[int, ...] = ()
    eta: float | None = None
    lam: float = 2.0
    beta: float = 1.0
    horizon: int = 1
    exponent_sign: int = -1

    @classmethod
    def parse(
        cls,
        text: str,
        lam: float = 2.0,
        beta: float = 1.0,
        horizon: int = 1,
        exponent_sign: int = -1,
    ) -> OptimizerKind:
        """Parse LO-3, MLO, JO, JSO:1+2+3, RO:100 or ARO:100."""
        match = _TAG.match(text.strip())
        if match is None:
            raise ValueError(f"Unrecognized optimizer {text!r}")
        lo, lo_index, simple, jso, jso_subset, ro, eta = match.groups()
        if lo:
            return cls(kind="LO", index=int(lo_index))
        if simple:
            return cls(kind=simple)  # type: ignore[arg-type]
        if jso:
            return cls(kind="JSO", subset=tuple(int(i) for i in jso_subset.split("+")))
        return cls(
            kind=ro,  # type: ignore[arg-type]
            eta=float(eta),
            lam=lam,
            beta=beta,
            horizon=horizon,
            exponent_sign=exponent_sign,
        )

    @property
    def tag(self) -> str:
        if self.kind == "LO":
            return f"LO-{self.index}"
        if self.kind == "JSO":
            return "JSO:" + "+".join(str(i) for i in self.subset)
        if self.kind in ("RO", "ARO"):
            return f"{self.kind}:{self.eta:g}"
        return self.kind

    def check(self, n_datasets: int) -> OptimizerKind:
        """Raise ValueError when the optimizer does not fit n_datasets."""
        if self.kind == "LO" and not (self.index is not None and 1 <= self.index <= n_datasets):
            raise ValueError(f"LO index {self.index} outside 1..{n_datasets}")
        if self.kind == "JSO":
            if not self.subset or len(set(self.subset)) != len(self.subset):
                raise ValueError("JSO subset must be nonempty without repeats")
            if any(not 1 <= i <= n_datasets for i in self.subset):
                raise ValueError(f"JSO subset {self.subset} outside 1..{n_datasets}")
        if self.kind in ("RO", "ARO"):
            if self.eta is None or not self.eta > 0.0:
                raise ValueError(f"eta must be positive, got {self.eta}")
            if not self.beta > 0.0 or self.lam < 0.0 or self.horizon < 1:
                raise ValueError("RO/ARO need beta > 0, lam >= 0 and horizon >= 1")
        return self


@dataclass(frozen=True)
class PricingResult:
    price: float
    per_run_prices: tuple[float, ...]
    stopping_histogram: np.ndarray
    tag: str

    @classmethod
    def aggregate(cls, results: Sequence[PricingResult]) -> PricingResult:
        """Average runs of one optimizer; histograms are summed."""
        if not results:
            raise PricingError("Nothing to aggregate")
        prices = tuple(r.price for r in results)
        return cls(
            price=float(np.mean(prices)),
            per_run_prices=prices,
            stopping_histogram=np.sum([r.stopping_histogram for r in results], axis=0),
            tag=results[0].tag,
        )


@dataclass(frozen=True)
class EvalStats:
    RP: float
    ci_low: float
    ci_high: float
    sigma_hat: float
    n_runs: int


@dataclass(frozen=True)
class PricingRow:
    method: str
    RP: float
    ci_low: float
    ci_high: float
    mean_price: float
    n_runs: int


@dataclass(frozen=True)
class PricingTable:
    """RP table of one pricing study plus the raw per-run prices."""

    rows: tuple[PricingRow, ...]
    per_run_prices: Mapping[str, tuple[float, ...]] = field(default_factory=dict)
    base_method: str = "LO-1"

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(row) for row in self.rows], columns=list(PricingRow.__dataclass_fields__))

    def row(self, method: str) -> PricingRow:
        for row in self.rows:
            if row.method == method:
                return row
        raise KeyError(method)


# =============================================================================
# Regression Step
# =============================================================================

def fit_regression(
    optimizer: OptimizerKind,
    U_list: Sequence[np.ndarray],
    Y_list: Sequence[np.ndarray],
    ridge: RidgeConfig,
) -> np.ndarray:
    """One continuation parameter theta_m from the per-dataset regression problems."""
    optimizer.check(len(U_list))
    kind = optimizer.kind
    if kind == "LO":
        i = optimizer.index - 1  # type: ignore[operator]
        return ridge_solve(U_list[i], Y_list[i], ridge).values
    if kind == "MLO":
        return np.mean([ridge_solve(U, Y, ridge).values for U, Y in zip(U_list, Y_list)], axis=0)
    if kind in ("JO", "JSO"):
        chosen = range(len(U_list)) if kind == "JO" else [i - 1 for i in optimizer.subset]
        U = np.vstack([U_list[i] for i in chosen])
        Y = np.concatenate([Y_list[i] for i in chosen])
        return ridge_solve(U, Y, ridge).values

    fed = federation_from_arrays(U_list, Y_list)
    optima, sharing = share(fed, ridge, float(optimizer.eta), exponent_sign=optimizer.exponent_sign)
    cfg = RegretConfig(lam=optimizer.lam, beta=optimizer.beta, horizon=optimizer.horizon)
    if kind == "RO":
        traj, _ = regret_optimal(fed, sharing.posterior, optima, cfg)
    else:
        traj, _ = accelerated_regret_optimal(fed, optima, cfg)
    return traj.mixed(sharing.posterior)


# =============================================================================
# RLSM
# =============================================================================

def _check_paths(train: Sequence[PathSet], eval_paths: PathSet, feature_map: FeatureMap) -> None:
    if not train:
        raise PricingError("At least one training path set is required")
    for k, paths in enumerate(train, start=1):
        if paths.n_dates != eval_paths.n_dates or not np.allclose(paths.exercise_times, eval_paths.exercise_times):
            raise PricingError(
                f"Training set {k} has a different exercise grid",
                details={"dataset": k, "M": paths.n_dates, "expected_M": eval_paths.n_dates},
            )
        if paths.n_assets != eval_paths.n_assets:
            raise PricingError(f"Training set {k} has {paths.n_assets} assets, expected {eval_paths.n_assets}")
    if feature_map.input_dim != eval_paths.n_assets:
        raise PricingError(
            f"Feature map expects {feature_map.input_dim} inputs but paths have {eval_paths.n_assets} assets"
        )


def _date_features(paths: PathSet, m: int, feature_map: FeatureMap, x0: float) -> np.ndarray:
    return featurize(feature_map, paths.prices[:, m, :] / x0)


def exercise_decisions(
    eval_paths: PathSet,
    thetas: Mapping[int, np.ndarray],
    feature_map: FeatureMap,
    Z: np.ndarray,
    x0: float,
) -> np.ndarray:
    """
    Boolean (paths, M+1) exercise flags. Column m in 1..M-1 reads only the
    prices at date m and theta_m; column M is always set and column 0 never.
    """
    M = eval_paths.n_dates
    flags = np.zeros((eval_paths.n_paths, M + 1), dtype=bool)
    flags[:, M] = True
    for m in range(1, M):
        continuation = _date_features(eval_paths, m, feature_map, x0) @ thetas[m]
        flags[:, m] = (Z[:, m] > 0.0) & (Z[:, m] >= continuation)
    return flags


def rlsm_price(
    train: Sequence[PathSet],
    eval_paths: PathSet,
    strike: float,
    rate: float | None,
    feature_map: FeatureMap,
    cfg: RidgeConfig,
    optimizer: OptimizerKind,
    payoff: str = "max_call",
    itm_only: bool = False,
) -> PricingResult:
    """
    Backward induction over the training sets of all datasets, then a forward
    pass of the frozen continuation estimates over independent eval paths.

    rate=None discounts every path set at its own model rate. Feature inputs
    are prices divided by the eval model's X0.
    """
    _check_paths(train, eval_paths, feature_map)
    optimizer.check(len(train))
    if payoff not in PAYOFFS:
        raise PricingError(f"Unknown payoff {payoff!r}")
    payoff_fn = PAYOFFS[payoff]
    x0 = eval_paths.params.x0
    M = eval_paths.n_dates

    Z_train = [payoff_fn(paths, strike, rate).Z for paths in train]
    realized = [Z[:, M].copy() for Z in Z_train]
    thetas: dict[int, np.ndarray] = {}

    for m in range(M - 1, 0, -1):
        U_list, Y_list = [], []
        for paths, Z, target in zip(train, Z_train, realized):
            U = _date_features(paths, m, feature_map, x0)
            rows = Z[:, m] > 0.0
            if itm_only and rows.any():
                U_list.append(U[rows])
                Y_list.append(target[rows])
            else:
                U_list.append(U)
                Y_list.append(target)
        thetas[m] = fit_regression(optimizer, U_list, Y_list, cfg)

        for i, (paths, Z) in enumerate(zip(train, Z_train)):
            continuation = _date_features(paths, m, feature_map, x0) @ thetas[m]
            exercise = (Z[:, m] > 0.0) & (Z[:, m] >= continuation)
            realized[i] = np.where(exercise, Z[:, m], realized[i])

    Z_eval = payoff_fn(eval_paths, strike, rate).Z
    flags = exercise_decisions(eval_paths, thetas, feature_map, Z_eval, x0)
    stop = np.argmax(flags, axis=1)
    payoffs = Z_eval[np.arange(eval_paths.n_paths), stop]
    price = max(float(Z_eval[0, 0]), float(payoffs.mean()))
    logger.debug(f"rlsm_price: {optimizer.tag} price={price:.6f}")
    return PricingResult(
        price=price,
        per_run_prices=(price,),
        stopping_histogram=np.bincount(stop, minlength=M + 1),
        tag=optimizer.tag,
    )


# =============================================================================
# Evaluation Statistics
# =============================================================================

def relative_performance(prices: Mapping[str, float], base_price: float) -> dict[str, float]:
    """price / base_price per method."""
    if not base_price > 0.0:
        raise PricingError(f"Base price must be positive, got {base_price}")
    return {method: float(price) / base_price for method, price in prices.items()}


def confidence_interval(per_run_RPs: Sequence[float]) -> EvalStats:
    """Mean RP with a normal 95% interval from the sample standard deviation."""
    values = np.asarray(per_run_RPs, dtype=float).reshape(-1)
    if values.size < 2:
        raise PricingError(f"At least two runs are required, got {values.size}")
    mean = float(values.mean())
    sigma = float(values.std(ddof=1))
    half = Z_975 * sigma / math.sqrt(values.size)
    return EvalStats(RP=mean, ci_low=mean - half, ci_high=mean + half, sigma_hat=sigma, n_runs=int(values.size))


# =============================================================================
# Studies
# =============================================================================

def _price_one_run(cfg: PriceConfig, run_seed: int, dump_to: Path | None = None) -> dict[str, float]:
    """
    Prices of every method on one set of paths; all methods share paths and
    feature map. dump_to receives the eval paths as CSV.
    """
    n_sets = len(cfg.datasets)
    main = cfg.datasets[0].to_params()

    def sim(params, n_paths: int, stream: int) -> PathSet:
        return simulate(
            params,
            cfg.n_assets,
            n_paths,
            cfg.exercise_dates,
            cfg.maturity,
            substeps=cfg.substeps,
            fine_steps=cfg.fine_steps,
            seed=run_seed,
            stream=stream,
        )

    feature_map = build_feature_map(cfg.n_assets, cfg.hidden_width, seed=child_seed(run_seed, "map"), include_constant=True)
    train = [sim(cfg.datasets[i].to_params(), cfg.train_size(i), i + 1) for i in range(n_sets)]
    eval_paths = sim(main, cfg.n_eval, 0)
    if dump_to is not None:
        dump_paths_csv(eval_paths, dump_to)
    ridge = RidgeConfig(kappa=cfg.kappa)

    def price(paths: Sequence[PathSet], optimizer: OptimizerKind) -> float:
        result = rlsm_price(paths, eval_paths, cfg.strike, None, feature_map, ridge, optimizer, cfg.payoff, cfg.itm_only)
        return result.price

    prices: dict[str, float] = {}
    for optimizer in _optimizers(cfg):
        prices[optimizer.tag] = price(train, optimizer)
    for size in cfg.oracle_sizes:
        # stream 1 again, so the oracle extends the main training paths
        prices[_oracle_tag(size)] = price([sim(main, size, 1)], OptimizerKind(kind="LO", index=1))
    return prices


def _optimizers(cfg: PriceConfig) -> list[OptimizerKind]:
    parsed = [
        OptimizerKind.parse(text, cfg.lam, cfg.beta, cfg.horizon, cfg.exponent_sign).check(len(cfg.datasets))
        for text in cfg.optimizers
    ]
    if all(o.tag != "LO-1" for o in parsed):
        parsed.insert(0, OptimizerKind(kind="LO", index=1))
    return parsed


def _oracle_tag(size: int) -> str:
    return f"LO-1(nu1={size})"


def run_pricing(
    cfg: PriceConfig,
    seed: int = 0,
    threads: int | None = 1,
    paths_csv: Path | str | None = None,
) -> PricingTable:
    """
    n_runs independent runs from seeds derived from seed; RP of every method is
    its per-run price over the mean LO-1 price. paths_csv, if given, receives
    the eval paths of the first run.
    """
    issues = cfg.validate()
    if issues:
        raise PricingError(f"Invalid pricing config: {issues[0]}", details={"issues": issues})
    run_seeds = [child_seed(seed, "run", k) for k in range(cfg.n_runs)]
    dump_to = Path(paths_csv) if paths_csv is not None else None
    runs = run_cells(
        lambda k: _price_one_run(cfg, run_seeds[k], dump_to if k == 0 else None),
        range(cfg.n_runs),
        threads,
    )

    methods = list(runs[0])
    per_run = {method: tuple(run[method] for run in runs) for method in methods}
    base = float(np.mean(per_run["LO-1"]))
    rows = []
    for method in methods:
        rps = list(relative_performance({str(k): p for k, p in enumerate(per_run[method])}, base).values())
        stats = confidence_interval(rps)
        rows.append(
            PricingRow(
                method=method,
                RP=stats.RP,
                ci_low=stats.ci_low,
                ci_high=stats.ci_high,
                mean_price=float(np.mean(per_run[method])),
                n_runs=stats.n_runs,
            )
        )
    log_operation(
        logger,
        "run_pricing",
        True,
        {"experiment": cfg.experiment, "methods": len(methods), "runs": cfg.n_runs, "base_price": f"{base:.4f}"},
    )
    return PricingTable(rows=tuple(rows), per_run_prices=per_run)


def experiment1(cfg: PriceConfig | None = None, seed: int = 0, threads: int | None = 1) -> PricingTable:
    """Thirteen Heston datasets in two rate regimes, with oracle LO-1 references."""
    return run_pricing(cfg or experiment1_preset(), seed=seed, threads=threads)


def experiment2(cfg: PriceConfig | None = None, seed: int = 0, threads: int | None = 1) -> PricingTable:
    """Rough main dataset with a dominating dissimilar Heston dataset."""
    return run_pricing(cfg or experiment2_preset(), seed=seed, threads=threads)


def write_training_overview(table: PricingTable, path: Path | str) -> Path:
    """CSV with columns method, RP, ci_low, ci_high, mean_price, n_runs."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    table.to_frame().to_csv(target, index=False, float_format="%.12g")
    return target


__all__ = [
    "OptimizerKind",
    "PricingResult",
    "EvalStats",
    "PricingRow",
    "PricingTable",
    "fit_regression",
    "exercise_decisions",
    "rlsm_price",
    "relative_performance",
    "confidence_interval",
    "run_pricing",
    "experiment1",
    "experiment2",
    "write_training_overview",
]
