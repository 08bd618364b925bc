"""Experiment scenarios behind the CLI subcommands.

Every scenario writes into ``<out>/<mode>/``: a ``config.yaml`` snapshot,
JSON reports and plot-ready CSV tables. Sweep directories hold
``runs/<job>.json`` per fit, ``results.csv`` with one row per (job, group)
and ``summary.csv`` with statistics per (grid value, group) over the ok
rows only.
"""

import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from pinnverse.core.metrics import (
    ae_mae,
    group_mape,
    parameter_errors,
    summarize,
    trajectory_mape,
)
from pinnverse.core.models import (
    ChannelSet,
    FitReport,
    MetricSet,
    ParameterSet,
    Trajectory,
)
from pinnverse.core.settings import (
    REFERENCE_GAMMA,
    REFERENCE_J,
    SINGLE_QUBIT_GAMMA,
    SINGLE_QUBIT_J,
    ExperimentConfig,
)
from pinnverse.data.trajectory_io import (
    FLOAT_FORMAT,
    read_parameters,
    read_trajectory_csv,
    write_json,
    write_parameters,
    write_report,
    write_trajectory_csv,
)
from pinnverse.dynamics.lindblad import evolve, plus_plus_state
from pinnverse.dynamics.liouvillian import generator_factory, write_generator_csv
from pinnverse.dynamics.sampling import add_gaussian_noise, sample_random_parameters
from pinnverse.error_handling import ConfigurationError, UndefinedMetricError
from pinnverse.experiments.runner import (
    JobResult,
    SweepJob,
    SweepRunner,
    job_seeds,
    make_jobs,
)
from pinnverse.network.checkpoint import save_checkpoint
from pinnverse.training.pinnverse import collocation_times, fit, reconstruct

logger = logging.getLogger(__name__)

ProgressCallback = Callable[[JobResult, int, int], None]

RESULT_COLUMNS = ["grid", "value", "realization", "seed", "group", "mape", "status"]
SUMMARY_COLUMNS = [
    "grid",
    "value",
    "group",
    "mean",
    "median",
    "min",
    "max",
    "n_ok",
    "n_failed",
]

DEFAULT_CROSSTALK_SIGMA = 0.02


@dataclass
class SweepOutcome:
    results: pd.DataFrame
    summary: pd.DataFrame
    directory: Path


@dataclass
class ScenarioOutcome:
    """A single fit with its metrics and, for the device data, the reference."""

    report: FitReport
    metrics: MetricSet
    directory: Path
    reference: Optional[MetricSet] = None
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)


@dataclass
class GeneratedData:
    truth: ParameterSet
    clean: Trajectory
    data: Trajectory
    directory: Path


@dataclass(frozen=True)
class SweepPayload:
    """Read-only inputs shared by every job of a sweep."""

    config: ExperimentConfig
    groups: tuple
    sigma: float


def experiment_dir(config: ExperimentConfig, mode: str) -> Path:
    """Create <out>/<mode> and snapshot the configuration into it."""
    directory = Path(config.out) / mode
    directory.mkdir(parents=True, exist_ok=True)
    if config.mode != mode:
        config = config.model_copy(update={"mode": mode})
    config.snapshot(directory / "config.yaml")
    return directory


def synthesize(
    truth: ParameterSet,
    channels: ChannelSet,
    times: Sequence[float],
    final_time: float,
) -> Trajectory:
    """Clean trajectory from |+>^n under the density-matrix oracle."""
    rho0 = plus_plus_state(truth.n_qubits)
    return evolve(rho0, truth, channels, times, final_time=final_time)


def _write_fit_artifacts(
    report: FitReport, directory: Path, channels: ChannelSet, config: ExperimentConfig
) -> None:
    write_report(report, directory / "report.json")
    if report.state is not None:
        save_checkpoint(report.state, directory / "checkpoint.json")
    if report.reconstruction is not None:
        write_trajectory_csv(report.reconstruction, directory / "reconstruction.csv")
    if config.dump_generator:
        gen = generator_factory(channels).build(report.recovered)
        write_generator_csv(gen, directory / "generator.csv")


def _write_table(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return path


def run_gen_data(config: ExperimentConfig) -> GeneratedData:
    """Sample a ground truth, integrate it and write the (noisy) data CSV."""
    directory = experiment_dir(config, "gen-data")
    channels = config.channel_set()
    final_time = config.resolved_final_time()
    truth_seed, noise_seed, _ = job_seeds(config.seed, 0, 0)
    truth = sample_random_parameters(
        config.n_qubits,
        truth_seed,
        mask=config.trainable_mask(channels),
        final_time=final_time,
        n_channels=len(channels),
    )
    clean = synthesize(
        truth, channels, collocation_times(config.n_samples, final_time), final_time
    )
    data = add_gaussian_noise(clean, config.sigma or 0.0, noise_seed)

    data_path = config.data or directory / "data.csv"
    write_trajectory_csv(data, data_path)
    write_trajectory_csv(clean, directory / "clean.csv")
    write_parameters(truth, config.truth or directory / "truth.json")
    logger.info(
        f"Generated {data.n_times} samples of {config.n_qubits}-qubit data "
        f"(sigma={config.sigma or 0.0:g}) into {data_path}"
    )
    return GeneratedData(truth=truth, clean=clean, data=data, directory=directory)


def run_fit(config: ExperimentConfig) -> ScenarioOutcome:
    """Fit a trajectory CSV; errors are reported when a truth file is given."""
    if config.data is None:
        raise ConfigurationError("The fit command needs a data CSV (--data)")
    data = read_trajectory_csv(config.data)
    if data.n_qubits != config.n_qubits:
        logger.info(
            f"Data holds {data.n_qubits}-qubit observables; "
            f"using n_qubits={data.n_qubits}"
        )
        config = config.model_copy(update={"n_qubits": data.n_qubits})
    directory = experiment_dir(config, "fit")
    channels = config.channel_set()
    truth = read_parameters(config.truth) if config.truth is not None else None

    report = fit(data, channels, config.fit_config(), truth=truth)
    metrics = ae_mae(data, report.reconstruction)
    metrics.mape = dict(report.mape)
    _write_fit_artifacts(report, directory, channels, config)
    write_json(metrics.to_dict(), directory / "metrics.json")
    return ScenarioOutcome(report=report, metrics=metrics, directory=directory)


def _sweep_worker(job: SweepJob, payload: SweepPayload) -> JobResult:
    """Resample a truth, generate data and fit it (runs in a worker process)."""
    config = payload.config
    channels = config.channel_set()
    final_time = config.resolved_final_time()
    mask = config.trainable_mask(channels)
    n_c = int(job.value) if job.grid == "n_c" else config.n_c
    sigma = float(job.value) if job.grid == "sigma" else payload.sigma

    truth = sample_random_parameters(
        config.n_qubits,
        job.truth_seed,
        mask=mask,
        final_time=final_time,
        n_channels=len(channels),
    )
    clean = synthesize(truth, channels, collocation_times(n_c, final_time), final_time)
    data = add_gaussian_noise(clean, sigma, job.noise_seed)
    fit_config = config.fit_config(n_c=n_c, final_time=final_time, seed=job.fit_seed)
    report = fit(data, channels, fit_config, truth=truth)
    return JobResult(
        job=job,
        status="ok",
        mape={g: report.mape[g] for g in payload.groups if g in report.mape},
        report=report.to_dict(),
    )


def _result_rows(results: List[JobResult], groups: Sequence[str]) -> pd.DataFrame:
    rows = []
    for result in results:
        job = result.job
        for group in groups:
            if not result.ok:
                status, value = "failed", float("nan")
            elif group in result.mape:
                status, value = "ok", result.mape[group]
            else:
                status, value = "excluded", float("nan")
            rows.append(
                {
                    "grid": job.grid,
                    "value": job.value,
                    "realization": job.realization,
                    "seed": job.fit_seed,
                    "group": group,
                    "mape": value,
                    "status": status,
                }
            )
    return pd.DataFrame(rows, columns=RESULT_COLUMNS)


def summarize_results(results: pd.DataFrame) -> pd.DataFrame:
    """Statistics per (grid value, group) over the rows flagged ok."""
    rows = []
    for (grid, value, group), frame in results.groupby(
        ["grid", "value", "group"], sort=False
    ):
        ok = frame[frame["status"] == "ok"]
        stats = summarize(ok["mape"].tolist())
        rows.append(
            {
                "grid": grid,
                "value": value,
                "group": group,
                **stats,
                "n_ok": int(len(ok)),
                "n_failed": int((frame["status"] == "failed").sum()),
            }
        )
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def run_sweep(
    config: ExperimentConfig,
    mode: str,
    grid: str,
    values: Sequence[float],
    groups: Sequence[str],
    sigma: float,
    progress: Optional[ProgressCallback] = None,
) -> SweepOutcome:
    """Shared driver of the collocation and noise sweeps."""
    directory = experiment_dir(config, mode)
    runs_dir = directory / "runs"
    runs_dir.mkdir(exist_ok=True)

    jobs = make_jobs(grid, values, config.realizations, config.seed)
    runner = SweepRunner(jobs=config.jobs)
    if progress is not None:
        runner.register_progress_callback(progress)
    payload = SweepPayload(config=config, groups=tuple(groups), sigma=sigma)
    results = runner.run(_sweep_worker, jobs, payload)

    for result in results:
        write_json(
            {
                "job": asdict(result.job),
                "status": result.status,
                "message": result.message,
                "mape": result.mape,
                "report": result.report,
            },
            runs_dir / f"{result.job.name}.json",
        )
    table = _result_rows(results, groups)
    summary = summarize_results(table)
    _write_table(table, directory / "results.csv")
    _write_table(summary, directory / "summary.csv")
    logger.info(f"Sweep over {grid} finished; tables in {directory}")
    return SweepOutcome(results=table, summary=summary, directory=directory)


def _rate_groups(channels: ChannelSet) -> List[str]:
    return [f"gamma_{k + 1}" for k in range(len(channels))]


def run_sweep_collocation(
    config: ExperimentConfig, progress: Optional[ProgressCallback] = None
) -> SweepOutcome:
    """MAPE of J_mean and of every decay rate against N_c."""
    groups = ["J_mean"] + _rate_groups(config.channel_set())
    return run_sweep(
        config,
        mode="sweep-collocation",
        grid="n_c",
        values=config.n_c_grid,
        groups=groups,
        sigma=config.sigma or 0.0,
        progress=progress,
    )


def run_sweep_noise(
    config: ExperimentConfig, progress: Optional[ProgressCallback] = None
) -> SweepOutcome:
    """MAPE of J_mean and gamma_mean against the noise level at fixed N_c."""
    return run_sweep(
        config,
        mode="sweep-noise",
        grid="sigma",
        values=config.sigma_grid,
        groups=["J_mean", "gamma_mean"],
        sigma=0.0,
        progress=progress,
    )


def _restart_table(report: FitReport, truth: ParameterSet) -> pd.DataFrame:
    rows = []
    for run in report.ok_runs:
        for group, value in group_mape(truth, run.recovered, report.trainable).items():
            rows.append({"seed": run.seed, "group": group, "mape": value})
    return pd.DataFrame(rows, columns=["seed", "group", "mape"])


def _parameter_table(report: FitReport, truth: ParameterSet) -> pd.DataFrame:
    """Best-restart errors per parameter with the spread over all ok restarts."""
    best = parameter_errors(truth, report.recovered, report.trainable)
    per_restart = [
        parameter_errors(truth, run.recovered, report.trainable)
        for run in report.ok_runs
    ]
    two_body = set(_two_body_labels(truth.n_qubits))
    rows = []
    for label, entry in best.items():
        spread = [e[label]["pct_error"] for e in per_restart]
        spread = [p for p in spread if p is not None]
        rows.append(
            {
                "parameter": label,
                "exact": entry["exact"],
                "predicted": entry["predicted"],
                "abs_error": entry["abs_error"],
                "pct_error": entry["pct_error"],
                "pct_min": min(spread) if spread else None,
                "pct_max": max(spread) if spread else None,
                "two_body": label in two_body,
                "trainable": entry["trainable"],
            }
        )
    return pd.DataFrame(rows)


def _two_body_labels(n_qubits: int) -> List[str]:
    if n_qubits != 2:
        return []
    return [f"J_{mu}_{nu}" for mu in (1, 2, 3) for nu in (1, 2, 3)]


def run_crosstalk(config: ExperimentConfig) -> ScenarioOutcome:
    """Fit every J (crosstalk block included) from noisy data at N_c points.

    The reconstruction MAPE compares the clean trajectory with the one
    integrated from the recovered parameters on ``n_samples`` times.
    """
    if config.n_qubits != 2:
        raise ConfigurationError("Crosstalk identification needs n_qubits=2")
    directory = experiment_dir(config, "crosstalk")
    channels = config.channel_set()
    final_time = config.resolved_final_time()
    mask = config.trainable_mask(channels)
    sigma = DEFAULT_CROSSTALK_SIGMA if config.sigma is None else config.sigma
    truth_seed, noise_seed, fit_seed = job_seeds(config.seed, 0, 0)

    truth = sample_random_parameters(
        2, truth_seed, mask=mask, final_time=final_time, n_channels=len(channels)
    )
    dense_times = collocation_times(config.n_samples, final_time)
    clean_dense = synthesize(truth, channels, dense_times, final_time)
    clean = synthesize(
        truth, channels, collocation_times(config.n_c, final_time), final_time
    )
    data = add_gaussian_noise(clean, sigma, noise_seed)

    fit_config = config.fit_config(final_time=final_time, seed=fit_seed)
    report = fit(data, channels, fit_config, truth=truth)

    rebuilt = reconstruct(report, dense_times, channels)
    metrics = MetricSet(mape=dict(report.mape))
    try:
        rec_mape, excluded = trajectory_mape(
            clean_dense, rebuilt, config.reconstruction_floor
        )
        metrics.mape["reconstruction"] = rec_mape
        metrics.excluded["reconstruction"] = excluded
    except UndefinedMetricError as e:
        logger.warning(f"Reconstruction MAPE skipped: {e}")

    parameters = _parameter_table(report, truth)
    restarts = _restart_table(report, truth)
    _write_fit_artifacts(report, directory, channels, config)
    write_trajectory_csv(data, directory / "data.csv")
    write_trajectory_csv(clean_dense, directory / "clean.csv")
    write_trajectory_csv(rebuilt, directory / "reconstruction.csv")
    write_parameters(truth, directory / "truth.json")
    _write_table(parameters, directory / "parameters.csv")
    _write_table(restarts, directory / "restarts.csv")
    write_json(metrics.to_dict(), directory / "metrics.json")
    logger.info(
        f"Crosstalk fit done: reconstruction MAPE="
        f"{metrics.mape.get('reconstruction', float('nan')):.3e}"
    )
    return ScenarioOutcome(
        report=report,
        metrics=metrics,
        directory=directory,
        tables={"parameters": parameters, "restarts": restarts},
    )


def reference_parameters() -> ParameterSet:
    """Literature fit of the single-qubit device."""
    return ParameterSet.from_nonidentity(1, REFERENCE_J, REFERENCE_GAMMA)


def single_qubit_truth() -> ParameterSet:
    return ParameterSet.from_nonidentity(1, SINGLE_QUBIT_J, SINGLE_QUBIT_GAMMA)


def _ae_frame(
    times: np.ndarray,
    metrics: MetricSet,
    reference: Optional[MetricSet],
    labels: Sequence[str],
) -> pd.DataFrame:
    frame = pd.DataFrame({"t": times})
    for i, label in enumerate(labels):
        frame[f"pinnverse_{label}"] = metrics.ae[i]
    if reference is not None:
        for i, label in enumerate(labels):
            frame[f"reference_{label}"] = reference.ae[i]
    return frame


def run_single_qubit(
    config: ExperimentConfig, csv_path: Optional[Path] = None
) -> ScenarioOutcome:
    """Fit device data (t, sx, sy, sz) in microseconds, or a synthetic stand-in.

    Without a CSV the data are generated from the recovered device values
    over 10 us, with ``sigma`` noise. The reference model is evaluated on
    the same times from the same initial vector.
    """
    if config.n_qubits != 1:
        config = config.model_copy(update={"n_qubits": 1})
    directory = experiment_dir(config, "single-qubit")
    channels = config.channel_set()
    csv_path = csv_path or config.data

    truth: Optional[ParameterSet] = None
    if csv_path is not None:
        data = read_trajectory_csv(csv_path, n_qubits=1)
        final_time = config.final_time or float(data.times[-1])
        if config.truth is not None:
            truth = read_parameters(config.truth)
    else:
        truth = single_qubit_truth()
        final_time = config.resolved_final_time()
        times = collocation_times(config.n_samples, final_time)
        clean = synthesize(truth, channels, times, final_time)
        _, noise_seed, _ = job_seeds(config.seed, 0, 0)
        data = add_gaussian_noise(clean, config.sigma or 0.0, noise_seed)
        write_trajectory_csv(data, directory / "data.csv")

    fit_config = config.fit_config(final_time=final_time)
    report = fit(data, channels, fit_config, truth=truth)
    metrics = ae_mae(data, report.reconstruction)
    metrics.mape = dict(report.mape)

    reference_metrics: Optional[MetricSet] = None
    reference = reference_parameters()
    if config.reference_model:
        reference_report = replace(report, recovered=reference)
        ref_traj = reconstruct(reference_report, data.times, channels)
        reference_metrics = ae_mae(data, ref_traj)
        write_trajectory_csv(ref_traj, directory / "reference.csv")

    rows = []
    for i, label in enumerate(report.recovered.labels):
        row = {
            "parameter": label,
            "predicted": float(report.recovered.vector()[i]),
            "reference": float(reference.vector()[i]),
        }
        if truth is not None:
            row["exact"] = float(truth.vector()[i])
        rows.append(row)
    parameters = pd.DataFrame(rows)

    ae = _ae_frame(data.times, metrics, reference_metrics, data.labels)
    _write_fit_artifacts(report, directory, channels, config)
    _write_table(parameters, directory / "parameters.csv")
    _write_table(ae, directory / "ae.csv")
    write_json(
        {
            "pinnverse": metrics.to_dict(),
            "reference": reference_metrics.to_dict() if reference_metrics else None,
        },
        directory / "metrics.json",
    )
    for label, value in metrics.mae.items():
        ref_value = reference_metrics.mae[label] if reference_metrics else None
        logger.info(f"MAE {label}: pinnverse={value:.3e} reference={ref_value}")
    return ScenarioOutcome(
        report=report,
        metrics=metrics,
        directory=directory,
        reference=reference_metrics,
        tables={"parameters": parameters, "ae": ae},
    )
