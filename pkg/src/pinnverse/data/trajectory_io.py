"""Trajectory CSV files and JSON documents (parameters, reports).

CSV layout: header ``t,<obs_1>,...,<obs_k>`` where the observable columns
are ``S_mu_nu`` for two qubits or ``sx,sy,sz`` for one qubit, values
written with 17 significant digits so a write/read cycle is exact.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from pinnverse.core.models import FitReport, ParameterSet, Trajectory
from pinnverse.core.pauli import ObservableBasis
from pinnverse.error_handling import IngestionError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

TIME_COLUMN = "t"
FLOAT_FORMAT = "%.17g"


def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    frame = pd.DataFrame(traj.values.T, columns=traj.labels)
    frame.insert(0, TIME_COLUMN, traj.times)
    return frame


def write_trajectory_csv(traj: Trajectory, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    trajectory_frame(traj).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.debug(f"Wrote {traj.n_times} samples to {path}")
    return path


def _parse_float(cell: Any) -> float:
    """Correctly rounded parse; anything unparsable becomes NaN."""
    try:
        return float(cell)
    except (TypeError, ValueError):
        return float("nan")


def _detect_qubits(columns: List[str], path: Path) -> int:
    """Pick the basis whose labels the header carries."""
    for n_qubits in (2, 1):
        labels = ObservableBasis.for_qubits(n_qubits).labels
        if any(label in columns for label in labels):
            return n_qubits
    raise IngestionError(f"{path} has no recognized observable columns", row=1)


def read_trajectory_csv(path: PathLike, n_qubits: Optional[int] = None) -> Trajectory:
    """Load a trajectory CSV.

    Raises:
        IngestionError: missing file or column, non-numeric cell, or time
            column that is not strictly increasing; ``row`` is the file
            line (header is line 1)
    """
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"Data file not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, skipinitialspace=True)
    except pd.errors.EmptyDataError as e:
        raise IngestionError(f"{path} is empty", row=1) from e
    except pd.errors.ParserError as e:
        raise IngestionError(f"Could not parse {path}: {e}") from e

    frame.columns = [str(c).strip() for c in frame.columns]
    columns = list(frame.columns)
    if TIME_COLUMN not in columns:
        raise IngestionError(
            f"{path} lacks the time column", row=1, column=TIME_COLUMN
        )
    if n_qubits is None:
        n_qubits = _detect_qubits(columns, path)
    labels = ObservableBasis.for_qubits(n_qubits).labels
    for label in labels:
        if label not in columns:
            raise IngestionError(
                f"{path} lacks an observable column", row=1, column=label
            )
    if frame.empty:
        raise IngestionError(f"{path} has a header but no samples", row=2)

    numeric: Dict[str, np.ndarray] = {}
    for column in [TIME_COLUMN] + labels:
        values = frame[column].map(_parse_float).to_numpy(dtype=float)
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise IngestionError(
                f"Non-numeric value {frame[column].iloc[bad[0]]!r}",
                row=int(bad[0]) + 2,
                column=column,
            )
        numeric[column] = values

    times = numeric[TIME_COLUMN]
    steps = np.flatnonzero(np.diff(times) <= 0)
    if steps.size:
        raise IngestionError(
            "Time column is not strictly increasing",
            row=int(steps[0]) + 3,
            column=TIME_COLUMN,
        )

    values = np.stack([numeric[label] for label in labels])
    logger.info(f"Loaded {times.size} samples of {len(labels)} observables from {path}")
    return Trajectory(times, values, n_qubits)


def write_json(data: Dict[str, Any], path: PathLike) -> Path:
    """Atomic write through a temporary sibling file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_file = path.with_suffix(path.suffix + ".tmp")
    with open(temp_file, "w") as f:
        json.dump(data, f, indent=2, sort_keys=False)
        f.write("\n")
    temp_file.replace(path)
    logger.debug(f"Wrote {path}")
    return path


def read_json(path: PathLike) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"File not found: {path}")
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise IngestionError(f"Invalid JSON in {path}: {e.msg}", row=e.lineno) from e
    if not isinstance(data, dict):
        raise IngestionError(f"{path} must hold a JSON object")
    return data


def write_parameters(params: ParameterSet, path: PathLike) -> Path:
    return write_json(params.to_dict(), path)


def read_parameters(path: PathLike) -> ParameterSet:
    data = read_json(path)
    try:
        return ParameterSet.from_dict(data)
    except (KeyError, TypeError, ValueError) as e:
        raise IngestionError(f"{path} is not a parameter set: {e}") from e


def write_report(report: FitReport, path: PathLike) -> Path:
    return write_json(report.to_dict(), path)


def read_report(path: PathLike) -> FitReport:
    data = read_json(path)
    if data.get("format") != "pinnverse-fit-report/1":
        raise IngestionError(f"{path} is not a fit report")
    return FitReport.from_dict(data)
