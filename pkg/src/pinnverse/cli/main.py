"""CLI entry point: argparse subcommands over pydantic-settings configuration.

Exit codes: 0 success, 1 failed run, 2 invalid configuration or usage.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from rich.console import Console

from pinnverse import __version__
from pinnverse.cli.bootstrap import ensure_directories, setup_logging
from pinnverse.core.settings import VALID_MODES, ExperimentConfig
from pinnverse.error_handling import ConfigurationError, PinnverseError, report_error
from pinnverse.experiments.runner import JobResult
from pinnverse.experiments.scenarios import (
    reference_parameters,
    run_crosstalk,
    run_fit,
    run_gen_data,
    run_single_qubit,
    run_sweep_collocation,
    run_sweep_noise,
)
from pinnverse.ui.report_display import ReportDisplayComponent

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2

CommandHandler = Callable[[ExperimentConfig, ReportDisplayComponent], int]


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Expected integers like 5,10,20: {text}")


def _float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Expected numbers like 0,0.01: {text}")


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    common = parser.add_argument_group("common")
    common.add_argument("--config", type=Path, help="Flat YAML configuration file")
    common.add_argument("--seed", type=int, help="Base seed")
    common.add_argument("--out", type=Path, help="Output root directory")
    common.add_argument("--jobs", type=int, help="Worker processes for sweeps")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING, ERROR")
    common.add_argument("--log-file", type=Path, help="Also log to this file")
    common.add_argument(
        "--debug", action="store_const", const=True, help="Same as --log-level DEBUG"
    )
    common.add_argument(
        "--no-timing",
        dest="record_timing",
        action="store_const",
        const=False,
        help="Write wall-clock times as null (bit-identical reports)",
    )

    model = parser.add_argument_group("model and data")
    model.add_argument("--n-qubits", type=int, help="1 or 2")
    model.add_argument("--channels", help="Channel preset name")
    model.add_argument("--final-time", type=float, help="Evolution window T")
    model.add_argument("--sigma", type=float, help="Gaussian noise level")
    model.add_argument("--n-samples", type=int, help="Samples of generated curves")
    model.add_argument("--data", type=Path, help="Trajectory CSV")
    model.add_argument("--truth", type=Path, help="Ground-truth parameter JSON")
    model.add_argument("--j-mask", help="all, none, local, two-body or labels")
    model.add_argument("--gamma-mask", help="all, none or channel labels")

    training = parser.add_argument_group("training")
    training.add_argument("--n-t", type=int, help="Physics collocation points")
    training.add_argument("--n-c", type=int, help="Data collocation points")
    training.add_argument("--max-steps", type=int)
    training.add_argument("--learning-rate", type=float)
    training.add_argument("--lr-decay", type=float)
    training.add_argument("--lr-decay-every", type=int)
    training.add_argument("--warmup-steps", type=int)
    training.add_argument(
        "--phys-lr-scale", type=float, help="J and rate step size over the network's"
    )
    training.add_argument("--clip-norm", type=float, help="Global gradient norm cap")
    training.add_argument("--loss-scale", choices=["normalized", "sum"])
    training.add_argument("--lambda-m", type=float, help="Physics loss weight")
    training.add_argument("--lambda-d", type=float, help="Data loss weight")
    training.add_argument("--restarts", type=int)
    training.add_argument("--plateau-window", type=int)
    training.add_argument("--plateau-tol", type=float)
    training.add_argument("--hidden-layers", type=_int_list, help="e.g. 64,64,64,64")
    training.add_argument("--activation", choices=["tanh", "sin"])
    training.add_argument("--initial-state", choices=["plus", "data"])
    training.add_argument("--log-every", type=int)

    sweep = parser.add_argument_group("sweeps")
    sweep.add_argument("--realizations", type=int, help="Runs per grid point")
    sweep.add_argument("--n-c-grid", type=_int_list, help="e.g. 5,10,20,40")
    sweep.add_argument("--sigma-grid", type=_float_list, help="e.g. 0,0.01,0.02")
    sweep.add_argument("--reconstruction-floor", type=float)

    outputs = parser.add_argument_group("outputs")
    outputs.add_argument(
        "--dump-generator",
        action="store_const",
        const=True,
        help="Write the recovered (A, b) as CSV",
    )
    outputs.add_argument(
        "--no-reference",
        dest="reference_model",
        action="store_const",
        const=False,
        help="Skip the literature reference model (single-qubit)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pinnverse",
        description=(
            "Identify Hamiltonian coefficients and Lindblad decay rates "
            "from observable time series."
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"pinnverse {__version__}"
    )
    subparsers = parser.add_subparsers(dest="mode", metavar="COMMAND")
    subparsers.required = True
    helps = {
        "gen-data": "Generate synthetic trajectories and their ground truth",
        "fit": "Fit a trajectory CSV",
        "sweep-collocation": "MAPE against the number of data collocation points",
        "sweep-noise": "MAPE against the noise level",
        "crosstalk": "Identify all couplings including the two-body block",
        "single-qubit": "Fit single-qubit device data (t, sx, sy, sz)",
    }
    for mode in VALID_MODES:
        sub = subparsers.add_parser(mode, help=helps[mode])
        if mode == "single-qubit":
            sub.add_argument("csv", nargs="?", type=Path, help="Device CSV")
        _add_common_arguments(sub)
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    """Merge the config file with the flags that were given (flags win)."""
    overrides: Dict[str, Any] = {
        key: value
        for key, value in vars(args).items()
        if key not in ("config", "csv") and value is not None
    }
    if getattr(args, "csv", None) is not None:
        overrides["data"] = args.csv
    return ExperimentConfig.load(args.config, overrides)


def _print_progress(
    display: ReportDisplayComponent,
) -> Callable[[JobResult, int, int], None]:
    def callback(result: JobResult, done: int, total: int) -> None:
        status = "[green]ok[/]" if result.ok else "[red]failed[/]"
        display.console.print(
            f"[dim][{done}/{total}][/] {result.job.grid}={result.job.value:g} "
            f"realization {result.job.realization}: {status}"
        )

    return callback


def _cmd_gen_data(config: ExperimentConfig, display: ReportDisplayComponent) -> int:
    generated = run_gen_data(config)
    target = config.data or generated.directory
    display.console.print(f"Wrote {generated.data.n_times} samples to {target}")
    return EXIT_OK


def _cmd_fit(config: ExperimentConfig, display: ReportDisplayComponent) -> int:
    outcome = run_fit(config)
    display.show(display.format_report(outcome.report, outcome.metrics))
    return EXIT_OK


def _cmd_sweep_collocation(
    config: ExperimentConfig, display: ReportDisplayComponent
) -> int:
    outcome = run_sweep_collocation(config, progress=_print_progress(display))
    display.show(display.summary_table(outcome.summary, "MAPE against N_c"))
    return EXIT_OK


def _cmd_sweep_noise(config: ExperimentConfig, display: ReportDisplayComponent) -> int:
    outcome = run_sweep_noise(config, progress=_print_progress(display))
    display.show(display.summary_table(outcome.summary, "MAPE against sigma"))
    return EXIT_OK


def _cmd_crosstalk(config: ExperimentConfig, display: ReportDisplayComponent) -> int:
    outcome = run_crosstalk(config)
    display.show(display.format_report(outcome.report, outcome.metrics))
    return EXIT_OK


def _cmd_single_qubit(config: ExperimentConfig, display: ReportDisplayComponent) -> int:
    outcome = run_single_qubit(config)
    reference = reference_parameters() if config.reference_model else None
    display.show(
        display.format_report(
            outcome.report, outcome.metrics, outcome.reference, reference
        )
    )
    return EXIT_OK


COMMANDS: Dict[str, CommandHandler] = {
    "gen-data": _cmd_gen_data,
    "fit": _cmd_fit,
    "sweep-collocation": _cmd_sweep_collocation,
    "sweep-noise": _cmd_sweep_noise,
    "crosstalk": _cmd_crosstalk,
    "single-qubit": _cmd_single_qubit,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    if argv is None:
        argv = sys.argv[1:]

    if "--version" in argv or "-v" in argv:
        print(f"pinnverse {__version__}")
        return EXIT_OK

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_CONFIG

    logger = logging.getLogger(__name__)
    try:
        config = config_from_args(args)
    except ConfigurationError as e:
        setup_logging("ERROR")
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG

    setup_logging(config.log_level, config.log_file)
    display = ReportDisplayComponent(console=Console())
    try:
        ensure_directories(config.out)
        return COMMANDS[config.mode](config, display)
    except KeyboardInterrupt:
        print("\n\nStopped by user.")
        return EXIT_FAILURE
    except ConfigurationError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG
    except PinnverseError as e:
        report_error(exception=e, component="cli", context_name=config.mode)
        return EXIT_FAILURE
    except Exception as e:
        logger.error(f"{config.mode} failed: {e}", exc_info=True)
        return EXIT_FAILURE
