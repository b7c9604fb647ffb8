"""
fedregret - Federations
Dataset containers, synthetic teacher-network federations, assumption checks,
feature-space perturbations and CSV import/export.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from exceptions import DataFormatError, DimensionError
from features import FeatureMap, build_feature_map, featurize
from logging_config import get_logger

logger = get_logger(__name__)


# =============================================================================
# Types
# =============================================================================

@dataclass(frozen=True)
class Dataset:
    """One local dataset D_i in feature space; X is kept when known."""

    U: np.ndarray
    Y: np.ndarray
    id: int
    X: np.ndarray | None = None

    def __post_init__(self) -> None:
        U = np.array(self.U, dtype=float)
        Y = np.array(self.Y, dtype=float).reshape(-1)
        if U.ndim != 2:
            raise DimensionError("Dataset features must be 2-D", got=U.shape)
        if U.shape[0] != Y.shape[0]:
            raise DimensionError("Rows of U and Y differ", expected=U.shape[0], got=Y.shape[0])
        if U.shape[0] < 1:
            raise DimensionError("Dataset must hold at least one sample", got=U.shape)
        U.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "Y", Y)
        if self.X is not None:
            X = np.array(self.X, dtype=float)
            if X.ndim != 2 or X.shape[0] != U.shape[0]:
                raise DimensionError("Rows of X and U differ", expected=U.shape[0], got=X.shape)
            X.setflags(write=False)
            object.__setattr__(self, "X", X)

    @property
    def size(self) -> int:
        return int(self.U.shape[0])

    @property
    def feature_dim(self) -> int:
        return int(self.U.shape[1])


@dataclass(frozen=True)
class Federation:
    """Ordered datasets; index 0 holds the main dataset D_1."""

    datasets: tuple[Dataset, ...]
    feature_map: FeatureMap | None = None

    def __post_init__(self) -> None:
        datasets = tuple(self.datasets)
        if not datasets:
            raise DimensionError("A federation needs at least one dataset", got=0)
        dims = {ds.feature_dim for ds in datasets}
        if len(dims) != 1:
            raise DimensionError("Datasets disagree on feature dimension", got=sorted(dims))
        if self.feature_map is not None and self.feature_map.output_dim not in dims:
            raise DimensionError(
                "Feature map output does not match dataset features",
                expected=self.feature_map.output_dim,
                got=dims.pop(),
            )
        object.__setattr__(self, "datasets", datasets)

    @property
    def n_datasets(self) -> int:
        return len(self.datasets)

    @property
    def feature_dim(self) -> int:
        return self.datasets[0].feature_dim

    @property
    def total_samples(self) -> int:
        return sum(ds.size for ds in self.datasets)

    @property
    def main(self) -> Dataset:
        return self.datasets[0]

    def sizes(self) -> list[int]:
        return [ds.size for ds in self.datasets]


@dataclass(frozen=True)
class AttackSpec:
    """Adversarial class parameters: persistence q and severity eps."""

    q: float
    eps: float
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.q <= 1.0:
            raise ValueError(f"q must lie in [0, 1], got {self.q}")
        if not self.eps >= 0.0:
            raise ValueError(f"eps must be non-negative, got {self.eps}")

    def n_attacked(self, total_samples: int) -> int:
        # small slack so that e.g. 0.1 * 50 counts as 5 rather than 4
        return int(math.floor(self.q * total_samples + 1e-9))


@dataclass(frozen=True)
class AssumptionReport:
    K_x: float
    K_y: float
    gram_psd: bool
    weighted_psd: bool
    min_gram_eig: float = 0.0
    min_weighted_eig: float = 0.0


@dataclass(frozen=True)
class PerturbationStats:
    changed_fraction: float
    max_feature_radius: float
    max_target_sq_radius: float
    changed: int = 0


# =============================================================================
# Construction
# =============================================================================

def federation_from_arrays(
    U_list: Sequence[np.ndarray],
    Y_list: Sequence[np.ndarray],
    feature_map: FeatureMap | None = None,
) -> Federation:
    """Wrap already-featurized arrays as a federation (ids start at 1)."""
    if len(U_list) != len(Y_list):
        raise DimensionError("U_list and Y_list differ in length", expected=len(U_list), got=len(Y_list))
    datasets = tuple(
        Dataset(U=U, Y=Y, id=i + 1) for i, (U, Y) in enumerate(zip(U_list, Y_list))
    )
    return Federation(datasets=datasets, feature_map=feature_map)


def _teacher_network(d: int, width: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    scale = 1.0 / math.sqrt(d)
    hidden = rng.standard_normal((width, d)) * scale
    bias = rng.standard_normal(width) * scale
    out = rng.standard_normal(width) / math.sqrt(width)
    return hidden, bias, out


def _teacher_forward(X: np.ndarray, net: tuple[np.ndarray, np.ndarray, np.ndarray]) -> np.ndarray:
    hidden, bias, out = net
    return np.maximum(X @ hidden.T + bias, 0.0) @ out


def gen_teacher_federation(
    N: int,
    d: int,
    samples_per_dataset: Sequence[int] | int,
    teacher_width: int,
    feature_map: FeatureMap,
    seed: int,
) -> Federation:
    """
    Draw N datasets, each labelled by its own random one-hidden-layer ReLU
    teacher network g_i. Inputs are standard normal in R^d.
    """
    if N < 1:
        raise ValueError(f"N must be at least 1, got {N}")
    if feature_map.input_dim != d:
        raise DimensionError("Feature map input dimension differs from d", expected=d, got=feature_map.input_dim)
    if isinstance(samples_per_dataset, int):
        sizes = [samples_per_dataset] * N
    else:
        sizes = [int(s) for s in samples_per_dataset]
    if len(sizes) != N:
        raise DimensionError("samples_per_dataset must have N entries", expected=N, got=len(sizes))

    children = np.random.SeedSequence(seed).spawn(N)
    datasets = []
    for i, (size, child) in enumerate(zip(sizes, children)):
        rng = np.random.default_rng(child)
        net = _teacher_network(d, teacher_width, rng)
        X = rng.standard_normal((size, d))
        Y = _teacher_forward(X, net)
        datasets.append(Dataset(U=featurize(feature_map, X), Y=Y, id=i + 1, X=X))

    fed = Federation(datasets=tuple(datasets), feature_map=feature_map)
    logger.debug(f"Generated teacher federation N={N}, sizes={sizes}, p={fed.feature_dim}")
    return fed


# =============================================================================
# Checks
# =============================================================================

def check_assumptions(fed: Federation, w: np.ndarray) -> AssumptionReport:
    """Boundedness constants and PSD flags for the Gram-type matrices."""
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.shape[0] != fed.n_datasets:
        raise DimensionError("Weight vector length differs from N", expected=fed.n_datasets, got=w.shape[0])

    K_x = max(float(np.max(np.linalg.norm(ds.U, axis=1))) for ds in fed.datasets)
    K_y = max(float(np.max(ds.Y ** 2)) for ds in fed.datasets)

    grams = [ds.U.T @ ds.U for ds in fed.datasets]
    gram = sum(grams)
    weighted = sum(wi * g for wi, g in zip(w, grams))
    min_gram = float(np.linalg.eigvalsh(gram)[0])
    # (w w^T) (x) G has spectrum {|w|^2 * eig(G)} plus zeros; report the nonzero part
    min_weighted = float(np.linalg.eigvalsh(weighted)[0]) * float(w @ w)
    return AssumptionReport(
        K_x=K_x,
        K_y=K_y,
        gram_psd=min_gram >= -1e-8,
        weighted_psd=min_weighted >= -1e-8,
        min_gram_eig=min_gram,
        min_weighted_eig=min_weighted,
    )


# =============================================================================
# Perturbation
# =============================================================================

def perturb(fed: Federation, attack: AttackSpec) -> Federation:
    """
    Replace floor(q * N_bar) pairs, chosen uniformly without replacement across
    the whole federation, by feature-space perturbations of radius eps and
    target perturbations of squared size eps.

    A trivial attack (no pairs selected or eps = 0) returns the input unchanged.
    """
    k = attack.n_attacked(fed.total_samples)
    if k == 0 or attack.eps == 0.0:
        return fed

    rng = np.random.default_rng(np.random.SeedSequence([attack.seed, 0x5EED]))
    chosen = np.sort(rng.choice(fed.total_samples, size=k, replace=False))
    directions = rng.standard_normal((k, fed.feature_dim))
    directions /= np.maximum(np.linalg.norm(directions, axis=1, keepdims=True), 1e-300)
    signs = rng.choice(np.array([-1.0, 1.0]), size=k)
    shift_u = attack.eps * directions
    shift_y = math.sqrt(attack.eps) * signs

    offsets = np.cumsum([0] + fed.sizes())
    datasets = []
    for i, ds in enumerate(fed.datasets):
        lo, hi = offsets[i], offsets[i + 1]
        mask = (chosen >= lo) & (chosen < hi)
        if not np.any(mask):
            datasets.append(ds)
            continue
        rows = chosen[mask] - lo
        U = np.array(ds.U)
        Y = np.array(ds.Y)
        U[rows] += shift_u[mask]
        Y[rows] += shift_y[mask]
        # raw inputs no longer correspond to the perturbed features
        datasets.append(Dataset(U=U, Y=Y, id=ds.id))

    logger.debug(f"Perturbed {k}/{fed.total_samples} pairs with eps={attack.eps}")
    return replace(fed, datasets=tuple(datasets))


def measure_perturbation(clean: Federation, attacked: Federation) -> PerturbationStats:
    """Measured changed fraction and radii between two aligned federations."""
    if clean.sizes() != attacked.sizes() or clean.feature_dim != attacked.feature_dim:
        raise DimensionError("Federations are not aligned", expected=clean.sizes(), got=attacked.sizes())
    changed = 0
    max_u = 0.0
    max_y = 0.0
    for a, b in zip(clean.datasets, attacked.datasets):
        du = np.linalg.norm(b.U - a.U, axis=1)
        dy = (b.Y - a.Y) ** 2
        changed += int(np.count_nonzero((du > 0) | (dy > 0)))
        max_u = max(max_u, float(du.max(initial=0.0)))
        max_y = max(max_y, float(dy.max(initial=0.0)))
    return PerturbationStats(
        changed_fraction=changed / clean.total_samples,
        max_feature_radius=max_u,
        max_target_sq_radius=max_y,
        changed=changed,
    )


# =============================================================================
# CSV Import / Export
# =============================================================================

def save_federation(fed: Federation, directory: Path | str, seed: int | None = None) -> Path:
    """
    Write dataset_<id>/X.csv, Y.csv (and U.csv when X is unknown) plus meta.json.

    meta.json holds the feature map parameters; seed, when given, is recorded
    as data_seed.
    """
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    meta: dict[str, object] = {"p": fed.feature_dim, "n_datasets": fed.n_datasets}
    if fed.feature_map is not None:
        meta.update(fed.feature_map.to_dict())
    if seed is not None:
        meta["data_seed"] = seed

    for ds in fed.datasets:
        sub = root / f"dataset_{ds.id}"
        sub.mkdir(exist_ok=True)
        if ds.X is not None:
            cols = [f"x{j}" for j in range(ds.X.shape[1])]
            pd.DataFrame(ds.X, columns=cols).to_csv(sub / "X.csv", index=False)
        else:
            cols = [f"u{j}" for j in range(ds.feature_dim)]
            pd.DataFrame(ds.U, columns=cols).to_csv(sub / "U.csv", index=False)
        pd.DataFrame({"y": ds.Y}).to_csv(sub / "Y.csv", index=False)

    (root / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8")
    logger.info(f"Saved federation with {fed.n_datasets} datasets to {root}")
    return root


def _read_matrix(path: Path) -> np.ndarray:
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataFormatError(f"Could not parse {path.name}", filepath=str(path), cause=e) from e
    try:
        values = frame.to_numpy(dtype=float)
    except ValueError as e:
        raise DataFormatError(f"Non-numeric entries in {path.name}", filepath=str(path), cause=e) from e
    if values.size == 0 or not np.all(np.isfinite(values)):
        raise DataFormatError(f"Empty or non-finite data in {path.name}", filepath=str(path))
    return values


def load_federation(directory: Path | str) -> Federation:
    """Read a federation written by save_federation, re-featurizing X through the stored map."""
    root = Path(directory)
    meta_path = root / "meta.json"
    if not meta_path.exists():
        raise DataFormatError("meta.json not found", filepath=str(meta_path))
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataFormatError("meta.json is not valid JSON", filepath=str(meta_path), cause=e) from e

    feature_map = None
    if "hidden_width" in meta:
        try:
            feature_map = build_feature_map(
                d=int(meta["d"]),
                hidden_width=int(meta["hidden_width"]),
                seed=int(meta["seed"]),
                weight_scale=float(meta["weight_scale"]),
                include_constant=bool(meta.get("include_constant", False)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise DataFormatError("meta.json lacks feature map parameters", filepath=str(meta_path), cause=e) from e

    subdirs = sorted(
        (d for d in root.iterdir() if d.is_dir() and d.name.startswith("dataset_")),
        key=lambda d: (not d.name[8:].isdigit(), int(d.name[8:]) if d.name[8:].isdigit() else 0, d.name),
    )
    if not subdirs:
        raise DataFormatError("No dataset_<id> directories found", filepath=str(root))

    datasets = []
    for sub in subdirs:
        suffix = sub.name.split("_", 1)[1]
        if not suffix.isdigit():
            raise DataFormatError("Dataset directory id is not an integer", filepath=str(sub))
        if not (sub / "Y.csv").exists():
            raise DataFormatError("Y.csv missing", filepath=str(sub))
        Y = _read_matrix(sub / "Y.csv").reshape(-1)
        try:
            if (sub / "X.csv").exists():
                if feature_map is None:
                    raise DataFormatError("X.csv given but meta.json has no feature map", filepath=str(sub))
                X = _read_matrix(sub / "X.csv")
                datasets.append(Dataset(U=featurize(feature_map, X), Y=Y, id=int(suffix), X=X))
            elif (sub / "U.csv").exists():
                datasets.append(Dataset(U=_read_matrix(sub / "U.csv"), Y=Y, id=int(suffix)))
            else:
                raise DataFormatError("Neither X.csv nor U.csv present", filepath=str(sub))
        except DimensionError as e:
            raise DataFormatError("Dataset files have inconsistent shapes", filepath=str(sub), cause=e) from e

    try:
        fed = Federation(datasets=tuple(datasets), feature_map=feature_map)
    except DimensionError as e:
        raise DataFormatError("Datasets are inconsistent", filepath=str(root), cause=e) from e
    logger.info(f"Loaded federation from {root}: N={fed.n_datasets}, p={fed.feature_dim}")
    return fed


__all__ = [
    "Dataset",
    "Federation",
    "AttackSpec",
    "AssumptionReport",
    "PerturbationStats",
    "federation_from_arrays",
    "gen_teacher_federation",
    "check_assumptions",
    "perturb",
    "measure_perturbation",
    "save_federation",
    "load_federation",
]
