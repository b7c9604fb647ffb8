"""
fedregret - Configuration Management
Environment defaults, per-subcommand experiment records and the flat
dotted-key config file format.

Config files use python-dotenv syntax, one ``section.field=value`` per line:

    seeds=0,1,2
    converge.lam=0
    price.experiment=experiment1
    price.dataset.2.rate=0.5
    price.optimizers=LO-1,MLO,JO,RO:100
"""

from __future__ import annotations

import os
import types
import typing
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Union

from dotenv import dotenv_values, load_dotenv

from exceptions import ConfigValidationError, MissingConfigError

# Load environment variables from .env file
load_dotenv()


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name, "")
    try:
        return int(raw) if raw.strip() else default
    except ValueError:
        return default


@dataclass
class ThemeConfig:
    """Console colours for result tables."""
    accent_color: str = "#FF8800"
    dim_text_color: str = "#7D8590"
    border_style: str = "#FF8800"

    # Status colors
    success_color: str = "#3FB950"
    warning_color: str = "#D29922"
    error_color: str = "#F85149"
    info_color: str = "#58A6FF"


@dataclass
class Config:
    """Process-wide defaults read from the environment."""

    threads: int = field(default_factory=lambda: _env_int("FEDREGRET_THREADS", 1))
    output_dir: Path = field(default_factory=lambda: Path(os.getenv("FEDREGRET_OUTPUT_DIR", "results")))
    seed: int = field(default_factory=lambda: _env_int("FEDREGRET_SEED", 0))
    log_level: str = field(default_factory=lambda: os.getenv("LOG_LEVEL", "INFO"))

    theme: ThemeConfig = field(default_factory=ThemeConfig)

    def validate(self) -> list[str]:
        """Validate configuration and return list of issues."""
        issues = []
        if self.threads < 1:
            issues.append(f"FEDREGRET_THREADS must be at least 1, got {self.threads}")
        if self.seed < 0:
            issues.append(f"FEDREGRET_SEED must be non-negative, got {self.seed}")
        return issues

    def to_dict(self) -> dict[str, Any]:
        return {
            "threads": self.threads,
            "output_dir": str(self.output_dir),
            "seed": self.seed,
            "log_level": self.log_level,
        }


# =============================================================================
# Subcommand Records
# =============================================================================

class _Section:
    """Shared to_dict for the subcommand records."""

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)  # type: ignore[call-overload]


def _positive(issues: list[str], **values: float) -> None:
    for name, value in values.items():
        if value is None or not value > 0:
            issues.append(f"{name} must be positive, got {value}")


def _non_negative(issues: list[str], **values: float) -> None:
    for name, value in values.items():
        if value is None or not value >= 0:
            issues.append(f"{name} must be non-negative, got {value}")


@dataclass
class ConvergeConfig(_Section):
    """Convergence study on teacher-network data."""

    n_datasets: int = 5
    input_dim: int = 5
    samples: int = 100
    teacher_width: int = 10
    hidden_width: int = 500
    weight_scale: float | None = None
    kappa: float = 0.0
    lam: float = 0.0
    beta: float = 1.0
    eta: float = 10.0
    exponent_sign: int = -1
    horizon: int = 1000
    learning_rate: float = 7e-5
    gd_steps: int = 10_000
    methods: list[str] = field(default_factory=lambda: ["gd", "ro", "aro"])
    backend: str = "auto"

    def validate(self) -> list[str]:
        issues: list[str] = []
        _positive(issues, n_datasets=self.n_datasets, input_dim=self.input_dim, samples=self.samples,
                  teacher_width=self.teacher_width, hidden_width=self.hidden_width, beta=self.beta,
                  eta=self.eta, horizon=self.horizon, learning_rate=self.learning_rate)
        _non_negative(issues, kappa=self.kappa, lam=self.lam, gd_steps=self.gd_steps)
        if self.exponent_sign not in (-1, 1):
            issues.append(f"exponent_sign must be -1 or 1, got {self.exponent_sign}")
        unknown = sorted(set(self.methods) - {"gd", "ro", "aro"})
        if unknown or not self.methods:
            issues.append(f"methods must be a nonempty subset of gd,ro,aro, got {','.join(self.methods)}")
        if self.backend not in ("auto", "dense", "spectral"):
            issues.append(f"backend must be auto, dense or spectral, got {self.backend}")
        return issues


@dataclass
class WeightsConfig(_Section):
    """Information-sharing weights for a stored or generated federation."""

    federation_dir: str = ""
    n_datasets: int = 5
    input_dim: int = 5
    samples: int = 100
    teacher_width: int = 10
    hidden_width: int = 500
    kappa: float = 0.0
    eta: float = 10.0
    exponent_sign: int = -1

    def validate(self) -> list[str]:
        issues: list[str] = []
        if self.federation_dir and not Path(self.federation_dir).is_dir():
            issues.append(f"federation_dir does not exist: {self.federation_dir}")
        _positive(issues, n_datasets=self.n_datasets, input_dim=self.input_dim, samples=self.samples,
                  teacher_width=self.teacher_width, hidden_width=self.hidden_width, eta=self.eta)
        _non_negative(issues, kappa=self.kappa)
        if self.exponent_sign not in (-1, 1):
            issues.append(f"exponent_sign must be -1 or 1, got {self.exponent_sign}")
        return issues


@dataclass
class RobustnessConfig(_Section):
    """Attack sweep over persistence q and severity eps."""

    n_datasets: int = 3
    input_dim: int = 5
    samples: int = 40
    teacher_width: int = 10
    hidden_width: int = 20
    kappa: float = 1.0
    eta: float = 10.0
    exponent_sign: int = -1
    lam: float = 1.0
    beta: float = 1.0
    horizon: int = 10
    q_grid: list[float] = field(default_factory=lambda: [0.05, 0.1, 0.2, 0.4])
    eps_grid: list[float] = field(default_factory=lambda: [0.01, 0.05, 0.1])
    attack_seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])

    def validate(self) -> list[str]:
        issues: list[str] = []
        _positive(issues, n_datasets=self.n_datasets, input_dim=self.input_dim, samples=self.samples,
                  teacher_width=self.teacher_width, hidden_width=self.hidden_width, eta=self.eta,
                  beta=self.beta, horizon=self.horizon)
        _non_negative(issues, kappa=self.kappa, lam=self.lam)
        if not self.q_grid or any(not 0.0 <= q <= 1.0 for q in self.q_grid):
            issues.append("q_grid must be a nonempty list of values in [0, 1]")
        if not self.eps_grid or any(e < 0.0 for e in self.eps_grid):
            issues.append("eps_grid must be a nonempty list of non-negative values")
        if not self.attack_seeds:
            issues.append("attack_seeds must be nonempty")
        if self.exponent_sign not in (-1, 1):
            issues.append(f"exponent_sign must be -1 or 1, got {self.exponent_sign}")
        return issues


@dataclass
class BenchConfig(_Section):
    """Timing of the dense pass against the accelerated pass."""

    n_list: list[int] = field(default_factory=lambda: [4, 8, 16])
    feature_dim: int = 32
    horizon: int = 50
    repeats: int = 3
    lam: float = 1.0
    beta: float = 1.0

    def validate(self) -> list[str]:
        issues: list[str] = []
        if not self.n_list or any(n < 2 for n in self.n_list):
            issues.append("n_list must be a nonempty list of integers >= 2")
        _positive(issues, feature_dim=self.feature_dim, horizon=self.horizon, repeats=self.repeats, beta=self.beta)
        _non_negative(issues, lam=self.lam)
        return issues


@dataclass
class DatasetModelConfig(_Section):
    """Model parameters of one pricing dataset; n_train overrides the shared training size."""

    rate: float = 0.05
    dividend: float = 0.1
    mean_reversion: float = 2.0
    v_inf: float = 0.01
    vol_of_vol: float = 0.2
    correlation: float = -0.3
    x0: float = 100.0
    v0: float | None = None
    hurst: float = 0.5
    n_train: int | None = None

    def to_params(self):
        """ModelParams for the simulator."""
        from montecarlo import ModelParams

        return ModelParams(
            rate=self.rate,
            dividend=self.dividend,
            mean_reversion=self.mean_reversion,
            v_inf=self.v_inf,
            vol_of_vol=self.vol_of_vol,
            correlation=self.correlation,
            x0=self.x0,
            v0=self.v0,
            hurst=self.hurst,
        )

    def validate(self) -> list[str]:
        issues: list[str] = []
        if not -1.0 <= self.correlation <= 1.0:
            issues.append(f"correlation must lie in [-1, 1], got {self.correlation}")
        if not 0.0 < self.hurst <= 0.5:
            issues.append(f"hurst must lie in (0, 0.5], got {self.hurst}")
        _positive(issues, x0=self.x0)
        _non_negative(issues, v_inf=self.v_inf, vol_of_vol=self.vol_of_vol, mean_reversion=self.mean_reversion)
        if self.v0 is not None and self.v0 < 0:
            issues.append(f"v0 must be non-negative, got {self.v0}")
        if self.n_train is not None and self.n_train < 1:
            issues.append(f"n_train must be positive, got {self.n_train}")
        return issues


@dataclass
class PriceConfig(_Section):
    """
    Bermudan pricing study. Dataset 1 is the main dataset; optimizers are
    strings such as LO-3, MLO, JO, JSO:1+2+3, RO:100 or ARO:100, and the
    regret hyperparameters (lam, beta, horizon) apply to every RO/ARO entry.
    """

    experiment: str = "custom"
    strike: float = 100.0
    maturity: float = 3.0
    exercise_dates: int = 9
    n_assets: int = 2
    payoff: str = "max_call"
    hidden_width: int = 300
    kappa: float = 2.0
    lam: float = 2.0
    beta: float = 1.0
    horizon: int = 1
    exponent_sign: int = -1
    n_train: int = 100
    n_eval: int = 10_000
    n_runs: int = 10
    substeps: int = 10
    fine_steps: int = 300
    itm_only: bool = False
    dump_paths: bool = False
    optimizers: list[str] = field(default_factory=lambda: ["LO-1", "MLO", "JO", "RO:100"])
    oracle_sizes: list[int] = field(default_factory=list)
    datasets: list[DatasetModelConfig] = field(default_factory=lambda: [DatasetModelConfig()])

    def validate(self) -> list[str]:
        from pricing import OptimizerKind

        issues: list[str] = []
        _positive(issues, strike=self.strike, maturity=self.maturity, exercise_dates=self.exercise_dates,
                  n_assets=self.n_assets, hidden_width=self.hidden_width, beta=self.beta, horizon=self.horizon,
                  n_train=self.n_train, n_eval=self.n_eval, n_runs=self.n_runs, substeps=self.substeps,
                  fine_steps=self.fine_steps)
        _non_negative(issues, kappa=self.kappa, lam=self.lam)
        if self.payoff not in ("max_call", "min_put"):
            issues.append(f"payoff must be max_call or min_put, got {self.payoff}")
        if self.exponent_sign not in (-1, 1):
            issues.append(f"exponent_sign must be -1 or 1, got {self.exponent_sign}")
        if self.n_runs < 2:
            issues.append("n_runs must be at least 2 for confidence intervals")
        if not self.datasets:
            issues.append("at least one dataset is required")
        for i, ds in enumerate(self.datasets, start=1):
            issues.extend(f"dataset.{i}: {msg}" for msg in ds.validate())
        if not self.optimizers:
            issues.append("optimizers must be nonempty")
        for text in self.optimizers:
            try:
                OptimizerKind.parse(text).check(len(self.datasets))
            except ValueError as e:
                issues.append(f"optimizer {text}: {e}")
        if any(n < 1 for n in self.oracle_sizes):
            issues.append("oracle_sizes must be positive")
        return issues

    def train_size(self, index: int) -> int:
        """Training paths for dataset index (0-based)."""
        override = self.datasets[index].n_train
        return self.n_train if override is None else override


# =============================================================================
# Presets
# =============================================================================

def experiment1_preset() -> PriceConfig:
    """Main Heston dataset plus twelve parameter combinations across two rate regimes."""
    datasets = [DatasetModelConfig()]
    for rate in (0.05, 0.5):
        for vol_of_vol in (0.15, 0.2, 0.25):
            for v_inf in (0.005, 0.015):
                datasets.append(DatasetModelConfig(rate=rate, vol_of_vol=vol_of_vol, v_inf=v_inf))
    optimizers = [f"LO-{i}" for i in range(1, 14)]
    optimizers += ["MLO", "JO", "JSO:" + "+".join(str(i) for i in range(1, 8))]
    optimizers += ["RO:10", "RO:100", "RO:500"]
    return PriceConfig(
        experiment="experiment1",
        datasets=datasets,
        optimizers=optimizers,
        oracle_sizes=[700, 2000],
    )


def experiment2_preset() -> PriceConfig:
    """Rough main dataset, one dominating dissimilar Heston dataset and one close one."""
    main = DatasetModelConfig(hurst=0.1)
    dominating = DatasetModelConfig(rate=0.5, n_train=5000)
    close = DatasetModelConfig()
    return PriceConfig(
        experiment="experiment2",
        datasets=[main, dominating, close],
        optimizers=["LO-1", "LO-2", "LO-3", "MLO", "JO", "RO:50", "RO:100"],
    )


PRESETS = {
    "custom": PriceConfig,
    "experiment1": experiment1_preset,
    "experiment2": experiment2_preset,
}

SECTIONS: dict[str, type] = {
    "converge": ConvergeConfig,
    "weights": WeightsConfig,
    "robustness": RobustnessConfig,
    "price": PriceConfig,
    "bench": BenchConfig,
}

GLOBAL_KEYS = frozenset({"seeds", "output_dir", "threads"})

# converge averages over three seeds unless told otherwise
DEFAULT_SEED_COUNT = {"converge": 3}


# =============================================================================
# Config File Loading
# =============================================================================

@dataclass
class RunConfig:
    """Resolved configuration of one CLI run."""

    subcommand: str
    section: Any
    seeds: list[int]
    output_dir: Path
    threads: int
    config_path: Path | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "subcommand": self.subcommand,
            "seeds": list(self.seeds),
            "output_dir": str(self.output_dir),
            "threads": self.threads,
            "config_path": str(self.config_path) if self.config_path else None,
            self.subcommand: self.section.to_dict(),
        }


def _coerce(raw: str, hint: Any) -> Any:
    """Convert a raw string to the annotated field type."""
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin in (Union, types.UnionType):
        inner = [a for a in args if a is not type(None)]
        if raw.strip().lower() in ("", "none", "null"):
            return None
        return _coerce(raw, inner[0])
    if origin is list:
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        return [_coerce(p, args[0]) for p in parts]
    if hint is bool:
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if hint is int:
        value = float(raw)
        if not value.is_integer():
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(value)
    if hint is float:
        return float(raw)
    if hint is str:
        return raw.strip()
    if hint is Path:
        return Path(raw.strip())
    raise ValueError(f"unsupported field type {hint!r}")


def _line_numbers(path: Path) -> dict[str, int]:
    numbers: dict[str, int] = {}
    for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("export "):
            stripped = stripped[len("export "):].lstrip()
        if not stripped or stripped.startswith("#"):
            continue
        numbers.setdefault(stripped.split("=", 1)[0].strip(), number)
    return numbers


def _set_field(record: Any, name: str, raw: str, key: str, line: int | None) -> Any:
    hints = typing.get_type_hints(type(record))
    if name not in hints or name == "datasets":
        raise ConfigValidationError(f"Unknown config key: {key}", config_key=key, line=line)
    try:
        value = _coerce(raw, hints[name])
    except ValueError as e:
        raise ConfigValidationError(f"Bad value for {key}: {e}", config_key=key, line=line, cause=e) from e
    return replace(record, **{name: value})


def _apply_dataset_key(section: PriceConfig, rest: str, raw: str, key: str, line: int | None) -> PriceConfig:
    index_text, _, name = rest.partition(".")
    if not index_text.isdigit() or int(index_text) < 1 or not name:
        raise ConfigValidationError(f"Dataset keys look like price.dataset.<n>.<field>: {key}", config_key=key, line=line)
    index = int(index_text) - 1
    datasets = list(section.datasets)
    while len(datasets) <= index:
        datasets.append(DatasetModelConfig())
    datasets[index] = _set_field(datasets[index], name, raw, key, line)
    return replace(section, datasets=datasets)


def load_run_config(
    path: Path | str | None,
    subcommand: str,
    overrides: Mapping[str, str] | None = None,
) -> RunConfig:
    """
    Resolve a RunConfig from defaults, the config file and CLI overrides (in
    that order of precedence, lowest first).

    Keys of other sections are ignored so one file can serve every subcommand.
    Override keys without a dot, other than the global ones, are read as
    fields of the active section.
    """
    if subcommand not in SECTIONS:
        raise ConfigValidationError(f"Unknown subcommand: {subcommand}", config_key=subcommand)

    entries: list[tuple[str, str, int | None]] = []
    config_path: Path | None = None
    if path is not None:
        config_path = Path(path)
        if not config_path.is_file():
            raise MissingConfigError(str(config_path))
        lines = _line_numbers(config_path)
        for key, value in dotenv_values(config_path).items():
            if value is None:
                raise ConfigValidationError(f"Missing '=' for key {key}", config_key=key, line=lines.get(key))
            entries.append((key, value, lines.get(key)))
    for key, value in (overrides or {}).items():
        if "." not in key and key not in GLOBAL_KEYS:
            key = f"{subcommand}.{key}"
        entries.append((key, value, None))

    env = get_config()
    seeds = [env.seed + k for k in range(DEFAULT_SEED_COUNT.get(subcommand, 1))]
    output_dir = env.output_dir
    threads = env.threads

    section_entries = []
    for key, raw, line in entries:
        prefix, _, rest = key.partition(".")
        if not rest:
            if key == "seeds":
                try:
                    seeds = _coerce(raw, list[int])
                except ValueError as e:
                    raise ConfigValidationError(f"Bad value for seeds: {e}", config_key=key, line=line) from e
            elif key == "output_dir":
                output_dir = Path(raw.strip())
            elif key == "threads":
                try:
                    threads = _coerce(raw, int)
                except ValueError as e:
                    raise ConfigValidationError(f"Bad value for threads: {e}", config_key=key, line=line) from e
            else:
                raise ConfigValidationError(f"Unknown config key: {key}", config_key=key, line=line)
        elif prefix not in SECTIONS:
            raise ConfigValidationError(f"Unknown config section: {prefix}", config_key=key, line=line)
        elif prefix == subcommand:
            section_entries.append((rest, raw, key, line))

    section: Any = SECTIONS[subcommand]()
    if subcommand == "price":
        # the preset goes first so later keys refine it
        for rest, raw, key, line in section_entries:
            if rest == "experiment":
                name = raw.strip()
                if name not in PRESETS:
                    raise ConfigValidationError(
                        f"Unknown experiment {name!r}; expected one of {', '.join(PRESETS)}",
                        config_key=key,
                        line=line,
                    )
                section = PRESETS[name]()

    for rest, raw, key, line in section_entries:
        if subcommand == "price" and rest == "experiment":
            continue
        if subcommand == "price" and rest.startswith("dataset."):
            section = _apply_dataset_key(section, rest[len("dataset."):], raw, key, line)
        else:
            section = _set_field(section, rest, raw, key, line)

    issues = section.validate()
    if not seeds:
        issues.append("seeds must be nonempty")
    if threads < 1:
        issues.append(f"threads must be at least 1, got {threads}")
    if issues:
        raise ConfigValidationError(
            f"Invalid {subcommand} config: {issues[0]}",
            config_key=subcommand,
            details={"issues": issues},
        )
    return RunConfig(
        subcommand=subcommand,
        section=section,
        seeds=seeds,
        output_dir=output_dir,
        threads=threads,
        config_path=config_path,
    )


# Global configuration instance
config = Config()


def get_config() -> Config:
    """Get the global configuration instance."""
    return config


def reload_config() -> Config:
    """Reload configuration from environment."""
    global config
    load_dotenv(override=True)
    config = Config()
    return config


__all__ = [
    "Config",
    "ThemeConfig",
    "ConvergeConfig",
    "WeightsConfig",
    "RobustnessConfig",
    "BenchConfig",
    "DatasetModelConfig",
    "PriceConfig",
    "RunConfig",
    "experiment1_preset",
    "experiment2_preset",
    "load_run_config",
    "get_config",
    "reload_config",
]
