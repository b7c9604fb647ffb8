"""
fedregret - Main Entry Point
Command-line surface: one subcommand per experiment, each writing CSVs and a
manifest.json into the output directory.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, List, Mapping, Optional

import numpy as np
import pandas as pd
import typer

from accelerated import accelerated_regret_optimal, benchmark
from config import RunConfig, get_config, load_run_config
from data import gen_teacher_federation, load_federation, save_federation
from display import ResultsConsole
from exceptions import ConfigError, DataFormatError, FedRegretError, NumericalError
from features import RidgeConfig, build_feature_map
from logging_config import get_logger, log_exception, log_operation, log_timing, run_log, setup_logging
from pricing import run_pricing, write_training_overview
from regret import (
    GradientDescentConfig,
    RegretConfig,
    gradient_descent_trace,
    ideal_loss,
    intermediate_energies,
    loss_curve,
    regret_optimal,
)
from robustness import robustness_sweep, summary
from run_manifest import RunManifest
from sharing import share
from utils.parallel import child_seed, run_cells

logger = get_logger(__name__)

TRACE_COLUMNS = ["method", "seed", "iteration", "loss", "energy", "regret"]
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2


# ============================================================================
# Experiment Handlers
# ============================================================================

@dataclass
class Subcommand:
    """A registered experiment."""
    name: str
    description: str
    handler: Callable[[RunConfig, RunManifest, ResultsConsole], None]


def _write_csv(frame: pd.DataFrame, path: Path, manifest: RunManifest, float_format: str = "%.17g") -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=float_format)
    manifest.record_output(path)
    return path


def _teacher_federation(section: Any, seed: int):
    feature_map = build_feature_map(
        section.input_dim,
        section.hidden_width,
        seed=child_seed(seed, "map"),
        weight_scale=getattr(section, "weight_scale", None),
    )
    return gen_teacher_federation(
        section.n_datasets,
        section.input_dim,
        section.samples,
        section.teacher_width,
        feature_map,
        seed=child_seed(seed, "data"),
    )


def _cmd_weights(run_config: RunConfig, manifest: RunManifest, console: ResultsConsole) -> None:
    section = run_config.section
    ridge = RidgeConfig(kappa=section.kappa)
    frames = []
    seeds = run_config.seeds[:1] if section.federation_dir else run_config.seeds
    for seed in seeds:
        if section.federation_dir:
            fed = load_federation(section.federation_dir)
        else:
            fed = _teacher_federation(section, seed)
            save_federation(fed, run_config.output_dir / f"federation_seed{seed}", seed=seed)
        _, sharing = share(fed, ridge, section.eta, exponent_sign=section.exponent_sign, threads=run_config.threads)
        frames.append(
            pd.DataFrame(
                {
                    "seed": seed,
                    "dataset_id": np.arange(1, fed.n_datasets + 1),
                    "score": sharing.scores,
                    "prior": sharing.prior,
                    "posterior": sharing.posterior,
                }
            )
        )
        console.render_weights(sharing)
    _write_csv(pd.concat(frames, ignore_index=True), run_config.output_dir / "weights.csv", manifest)


def _converge_seed(section: Any, seed: int) -> pd.DataFrame:
    """Trace rows of every requested method for one seed."""
    fed = _teacher_federation(section, seed)
    optima, sharing = share(fed, RidgeConfig(kappa=section.kappa), section.eta, exponent_sign=section.exponent_sign)
    w = sharing.posterior
    cfg = RegretConfig(lam=section.lam, beta=section.beta, horizon=section.horizon, backend=section.backend)
    frames = []

    def frame(method: str, losses: np.ndarray, energies: np.ndarray, ideal: float) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "method": method,
                "seed": seed,
                "iteration": np.arange(losses.shape[0]),
                "loss": losses,
                "energy": energies,
                "regret": energies - ideal,
            }
        )

    if "gd" in section.methods:
        gd = GradientDescentConfig(learning_rate=section.learning_rate, steps=section.gd_steps)
        losses, energies = gradient_descent_trace(fed, w, gd, optima.stacked, cfg, optima.stacked)
        frames.append(frame("gd", losses, energies, ideal_loss(w, fed)))
    if "ro" in section.methods:
        traj, _ = regret_optimal(fed, w, optima, cfg)
        energies = intermediate_energies(traj, cfg, w, fed, optima.stacked)
        frames.append(frame("ro", loss_curve(traj, w, fed), energies, ideal_loss(w, fed)))
    if "aro" in section.methods:
        uniform = np.full(fed.n_datasets, 1.0 / fed.n_datasets)
        anchor = optima.stacked_mean
        traj, _ = accelerated_regret_optimal(fed, optima, cfg, start=anchor)
        energies = intermediate_energies(traj, cfg, uniform, fed, anchor)
        frames.append(frame("aro", loss_curve(traj, uniform, fed), energies, ideal_loss(uniform, fed)))
    return pd.concat(frames, ignore_index=True)


def _cmd_converge(run_config: RunConfig, manifest: RunManifest, console: ResultsConsole) -> None:
    section = run_config.section
    frames = run_cells(lambda seed: _converge_seed(section, seed), run_config.seeds, run_config.threads)
    trace = (
        pd.concat(frames, ignore_index=True)
        .sort_values(["method", "seed", "iteration"], kind="mergesort")
        .reset_index(drop=True)[TRACE_COLUMNS]
    )
    _write_csv(trace, run_config.output_dir / "trace.csv", manifest)

    finals = []
    for (method, seed), group in trace.groupby(["method", "seed"], sort=True):
        finals.append((str(method), int(seed), float(group["loss"].iloc[0]), float(group["loss"].iloc[-1])))
    console.render_converge(finals)


def _cmd_price(run_config: RunConfig, manifest: RunManifest, console: ResultsConsole) -> None:
    section = run_config.section
    paths_csv = run_config.output_dir / "paths.csv" if section.dump_paths else None
    table = run_pricing(section, seed=run_config.seeds[0], threads=run_config.threads, paths_csv=paths_csv)
    if paths_csv is not None:
        manifest.record_output(paths_csv)
    target = write_training_overview(table, run_config.output_dir / "training_overview.csv")
    manifest.record_output(target)

    runs = pd.DataFrame(
        [
            {"method": method, "run": k, "price": price}
            for method, prices in table.per_run_prices.items()
            for k, price in enumerate(prices)
        ]
    )
    _write_csv(runs, run_config.output_dir / "price_runs.csv", manifest, float_format="%.12g")
    console.render_pricing(table)


def _cmd_robustness(run_config: RunConfig, manifest: RunManifest, console: ResultsConsole) -> None:
    section = run_config.section
    seed = run_config.seeds[0]
    fed = _teacher_federation(section, seed)
    ridge = RidgeConfig(kappa=section.kappa)
    _, sharing = share(fed, ridge, section.eta, exponent_sign=section.exponent_sign)
    cfg = RegretConfig(lam=section.lam, beta=section.beta, horizon=section.horizon)
    report = robustness_sweep(
        fed,
        sharing.posterior,
        cfg,
        section.q_grid,
        section.eps_grid,
        section.attack_seeds,
        ridge=ridge,
        threads=run_config.threads,
    )
    max_ratio, median_ratio = summary(report)

    target = run_config.output_dir / "robustness.csv"
    target.parent.mkdir(parents=True, exist_ok=True)
    report.to_frame().to_csv(target, index=False, float_format="%.17g")
    with open(target, "a", encoding="utf-8") as f:
        f.write(f"# summary,max_ratio={max_ratio:.17g},median_ratio={median_ratio:.17g}\n")
    manifest.record_output(target)
    manifest.note("max_ratio", max_ratio)
    manifest.note("median_ratio", median_ratio)
    console.render_robustness(max_ratio, median_ratio, len(report.rows))


def _cmd_bench(run_config: RunConfig, manifest: RunManifest, console: ResultsConsole) -> None:
    section = run_config.section
    rows = benchmark(
        section.n_list,
        section.feature_dim,
        section.horizon,
        seed=run_config.seeds[0],
        repeats=section.repeats,
        lam=section.lam,
        beta=section.beta,
    )
    frame = pd.DataFrame(
        {
            "n_datasets": [r.n_datasets for r in rows],
            "feature_dim": [r.feature_dim for r in rows],
            "horizon": [r.horizon for r in rows],
            "t_ro": [r.t_ro for r in rows],
            "t_aro": [r.t_aro for r in rows],
            "ratio": [r.ratio for r in rows],
        }
    )
    _write_csv(frame, run_config.output_dir / "bench.csv", manifest, float_format="%.6g")
    console.render_bench(rows)


SUBCOMMANDS: dict[str, Subcommand] = {
    cmd.name: cmd
    for cmd in (
        Subcommand("weights", "Information-sharing weights", _cmd_weights),
        Subcommand("converge", "Convergence traces of gradient descent and regret-optimal training", _cmd_converge),
        Subcommand("price", "Bermudan pricing with federated regressions", _cmd_price),
        Subcommand("robustness", "Cost sensitivity to poisoned samples", _cmd_robustness),
        Subcommand("bench", "Dense versus accelerated timings", _cmd_bench),
    )
}


# ============================================================================
# Orchestration
# ============================================================================

def _report_failure(subcommand: str, error: Exception, console: ResultsConsole) -> int:
    if isinstance(error, NumericalError):
        log_exception(logger, f"{subcommand} failed in module {error.module}", error)
        console.render_error(f"Numerical failure in module {error.module or 'unknown'}: {error}", title="Numerical error")
        return EXIT_NUMERICAL
    log_exception(logger, f"{subcommand} failed", error)
    if isinstance(error, (ConfigError, DataFormatError, FileNotFoundError)):
        console.render_error(str(error), title="Configuration error")
    else:
        console.render_error(str(error))
    return EXIT_CONFIG


def run(
    subcommand: str,
    config_path: Path | str | None = None,
    overrides: Mapping[str, str] | None = None,
    console: ResultsConsole | None = None,
) -> int:
    """
    Resolve the config, run the experiment and write its manifest.

    Returns 0 on success, 1 on config or input-file errors and 2 on numerical
    failures. Once the output directory is known the run is mirrored into its
    run.log.
    """
    console = console or ResultsConsole()
    try:
        run_config = load_run_config(config_path, subcommand, overrides)
        run_config.output_dir.mkdir(parents=True, exist_ok=True)
    except (FedRegretError, FileNotFoundError) as e:
        return _report_failure(subcommand, e, console)

    with run_log(run_config.output_dir):
        try:
            manifest = RunManifest(run_config)
            with log_timing(logger, subcommand, logging.INFO):
                SUBCOMMANDS[subcommand].handler(run_config, manifest, console)
            manifest.write()
        except (FedRegretError, FileNotFoundError) as e:
            return _report_failure(subcommand, e, console)
        log_operation(logger, subcommand, True, {"output_dir": run_config.output_dir, "seeds": len(run_config.seeds)})

    console.render_success(f"Results written to {run_config.output_dir}")
    return EXIT_OK


def emit_plot_data(trace_csv: Path | str, output_dir: Path | str | None = None) -> list[Path]:
    """
    Per-method mean and population std over seeds of loss, energy and regret,
    written as whitespace-delimited <method>.dat files next to the trace unless
    output_dir is given.
    """
    source = Path(trace_csv)
    if not source.is_file():
        raise DataFormatError("Trace file not found", filepath=str(source))
    try:
        trace = pd.read_csv(source, comment="#")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataFormatError(f"Trace is not valid CSV: {e}", filepath=str(source), cause=e) from e
    missing = [c for c in TRACE_COLUMNS if c not in trace.columns]
    if missing:
        raise DataFormatError(f"Trace lacks columns: {', '.join(missing)}", filepath=str(source))
    values = trace[["iteration", "loss", "energy", "regret"]]
    if not all(pd.api.types.is_numeric_dtype(values[c]) for c in values.columns) or values.isna().any().any():
        raise DataFormatError("Trace has non-numeric values", filepath=str(source))

    target_dir = Path(output_dir) if output_dir is not None else source.parent
    target_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for method, group in trace.groupby("method", sort=True):
        stats = group.groupby("iteration", sort=True)[["loss", "energy", "regret"]].agg(
            ["mean", lambda s: float(np.std(s.to_numpy(), ddof=0))]
        )
        stats.columns = [f"{name}_{'mean' if agg == 'mean' else 'std'}" for name, agg in stats.columns]
        target = target_dir / f"{method}.dat"
        with open(target, "w", encoding="utf-8") as f:
            f.write("# iteration " + " ".join(stats.columns) + "\n")
            stats.to_csv(f, sep=" ", header=False, float_format="%.10g")
        written.append(target)
    return written


# ============================================================================
# CLI Entry Point
# ============================================================================

app = typer.Typer(
    name="fedregret",
    help="fedregret - regret-optimal federated transfer learning experiments",
    add_completion=False,
)

CONFIG_OPTION = typer.Option(None, "--config", "-c", help="Config file with section.field=value lines")
OUTPUT_OPTION = typer.Option(None, "--output-dir", "-o", help="Directory for CSVs and manifest.json")
SEED_OPTION = typer.Option(None, "--seed", help="Seed; repeat for several seeds")
SET_OPTION = typer.Option(None, "--set", help="Override a config key, e.g. --set converge.lam=2")
THREADS_OPTION = typer.Option(None, "--threads", help="Worker threads (default FEDREGRET_THREADS or 1)")


def _overrides(
    output_dir: Optional[Path],
    seed: Optional[List[int]],
    sets: Optional[List[str]],
    threads: Optional[int],
) -> dict[str, str]:
    overrides: dict[str, str] = {}
    for item in sets or []:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise typer.BadParameter(f"expected KEY=VALUE, got {item!r}", param_hint="--set")
        overrides[key.strip()] = value.strip()
    if output_dir is not None:
        overrides["output_dir"] = str(output_dir)
    if seed:
        overrides["seeds"] = ",".join(str(s) for s in seed)
    if threads is not None:
        overrides["threads"] = str(threads)
    return overrides


def _dispatch(name: str, config: Optional[Path], output_dir, seed, sets, threads) -> None:
    code = run(name, config, _overrides(output_dir, seed, sets, threads))
    if code != EXIT_OK:
        raise typer.Exit(code)


@app.command()
def weights(
    config: Optional[Path] = CONFIG_OPTION,
    output_dir: Optional[Path] = OUTPUT_OPTION,
    seed: Optional[List[int]] = SEED_OPTION,
    sets: Optional[List[str]] = SET_OPTION,
    threads: Optional[int] = THREADS_OPTION,
) -> None:
    """Compute prior and posterior sharing weights."""
    _dispatch("weights", config, output_dir, seed, sets, threads)


@app.command()
def converge(
    config: Optional[Path] = CONFIG_OPTION,
    output_dir: Optional[Path] = OUTPUT_OPTION,
    seed: Optional[List[int]] = SEED_OPTION,
    sets: Optional[List[str]] = SET_OPTION,
    threads: Optional[int] = THREADS_OPTION,
) -> None:
    """Write trace.csv for gradient descent, regret-optimal and accelerated training."""
    _dispatch("converge", config, output_dir, seed, sets, threads)


@app.command()
def price(
    config: Optional[Path] = CONFIG_OPTION,
    output_dir: Optional[Path] = OUTPUT_OPTION,
    seed: Optional[List[int]] = SEED_OPTION,
    sets: Optional[List[str]] = SET_OPTION,
    threads: Optional[int] = THREADS_OPTION,
) -> None:
    """Price a Bermudan max-call with every configured optimizer."""
    _dispatch("price", config, output_dir, seed, sets, threads)


@app.command()
def robustness(
    config: Optional[Path] = CONFIG_OPTION,
    output_dir: Optional[Path] = OUTPUT_OPTION,
    seed: Optional[List[int]] = SEED_OPTION,
    sets: Optional[List[str]] = SET_OPTION,
    threads: Optional[int] = THREADS_OPTION,
) -> None:
    """Sweep attack persistence and severity."""
    _dispatch("robustness", config, output_dir, seed, sets, threads)


@app.command()
def bench(
    config: Optional[Path] = CONFIG_OPTION,
    output_dir: Optional[Path] = OUTPUT_OPTION,
    seed: Optional[List[int]] = SEED_OPTION,
    sets: Optional[List[str]] = SET_OPTION,
    threads: Optional[int] = THREADS_OPTION,
) -> None:
    """Time the dense pass against the accelerated pass."""
    _dispatch("bench", config, output_dir, seed, sets, threads)


@app.command()
def plot(
    trace: Path = typer.Argument(..., help="trace.csv written by converge"),
    output_dir: Optional[Path] = OUTPUT_OPTION,
) -> None:
    """Turn a trace into per-method mean/std .dat files for gnuplot."""
    console = ResultsConsole()
    try:
        written = emit_plot_data(trace, output_dir)
    except DataFormatError as e:
        log_exception(logger, "plot failed", e)
        console.render_error(str(e), title="Data error")
        raise typer.Exit(EXIT_CONFIG)
    console.render_success("\n".join(str(p) for p in written), title="Plot data")


def run_cli() -> None:
    """Entry point for the 'fedregret' command."""
    setup_logging(level=get_config().log_level)
    app()


if __name__ == "__main__":
    run_cli()
