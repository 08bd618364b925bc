"""Parameter and trajectory error metrics.

MAPE values are fractions (0.01 means 1%). Entries whose exact value is
zero cannot enter a percentage error and are excluded from the mean;
excluding every entry raises :class:`UndefinedMetricError`.
"""

import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from pinnverse.core.models import MetricSet, ParameterSet, TrainableMask, Trajectory
from pinnverse.core.pauli import PauliString
from pinnverse.error_handling import DimensionMismatchError, UndefinedMetricError

logger = logging.getLogger(__name__)

DEFAULT_RECONSTRUCTION_FLOOR = 0.05


def _mape_with_count(exact: np.ndarray, predicted: np.ndarray) -> Tuple[float, int]:
    exact = np.asarray(exact, dtype=float).reshape(-1)
    predicted = np.asarray(predicted, dtype=float).reshape(-1)
    if exact.shape != predicted.shape:
        raise DimensionMismatchError(
            f"Exact ({exact.size}) and predicted ({predicted.size}) lengths differ"
        )
    keep = exact != 0.0
    excluded = int(exact.size - keep.sum())
    if not keep.any():
        raise UndefinedMetricError(
            f"MAPE undefined: all {exact.size} exact entries were excluded"
        )
    ratios = np.abs(exact[keep] - predicted[keep]) / np.abs(exact[keep])
    return float(np.mean(ratios)), excluded


def mape(exact: Sequence[float], predicted: Sequence[float]) -> float:
    """Mean absolute percentage error over entries with nonzero exact value."""
    value, excluded = _mape_with_count(np.asarray(exact), np.asarray(predicted))
    if excluded:
        logger.debug(f"MAPE excluded {excluded} zero-valued exact entries")
    return value


def parameter_errors(
    truth: ParameterSet,
    recovered: ParameterSet,
    mask: Optional[TrainableMask] = None,
) -> Dict[str, Dict[str, Any]]:
    """Per-parameter exact/predicted values with absolute and fractional errors.

    ``pct_error`` is None when the exact value is zero.
    """
    if truth.n_qubits != recovered.n_qubits or truth.n_channels != recovered.n_channels:
        raise DimensionMismatchError("Ground truth and recovered parameters disagree")
    flags = mask.flags() if mask is not None else np.ones(len(truth.labels), bool)
    errors: Dict[str, Dict[str, Any]] = {}
    for label, exact, predicted, trainable in zip(
        truth.labels, truth.vector(), recovered.vector(), flags
    ):
        abs_error = abs(float(exact) - float(predicted))
        errors[label] = {
            "exact": float(exact),
            "predicted": float(predicted),
            "abs_error": abs_error,
            "pct_error": abs_error / abs(exact) if exact != 0 else None,
            "trainable": bool(trainable),
        }
    return errors


def _two_body_positions(n_qubits: int) -> List[int]:
    return [
        i - 1
        for i in range(1, 4**n_qubits)
        if PauliString.from_index(i, n_qubits).is_two_body
    ]


def group_mape(
    truth: ParameterSet,
    recovered: ParameterSet,
    mask: Optional[TrainableMask] = None,
) -> Dict[str, float]:
    """MAPE per parameter group.

    Groups: ``J_mean`` (all J), ``gamma_mean`` (all decay rates), each
    ``gamma_k`` and, for two qubits, ``J_two_body`` (the crosstalk block).
    When a mask is given only trainable entries are scored. Groups with no
    admissible entry are left out.
    """
    j_keep = np.ones(truth.j_nonidentity.size, bool)
    g_keep = np.ones(truth.n_channels, bool)
    if mask is not None:
        j_keep, g_keep = mask.j[1:], mask.gamma

    groups: Dict[str, Tuple[np.ndarray, np.ndarray]] = {
        "J_mean": (truth.j_nonidentity[j_keep], recovered.j_nonidentity[j_keep]),
        "gamma_mean": (truth.gamma[g_keep], recovered.gamma[g_keep]),
    }
    if truth.n_qubits == 2:
        positions = [p for p in _two_body_positions(2) if j_keep[p]]
        groups["J_two_body"] = (
            truth.j_nonidentity[positions],
            recovered.j_nonidentity[positions],
        )
    for k, label in enumerate(truth.gamma_labels):
        if g_keep[k]:
            groups[label] = (truth.gamma[k : k + 1], recovered.gamma[k : k + 1])

    result: Dict[str, float] = {}
    for name, (exact, predicted) in groups.items():
        if exact.size == 0:
            continue
        try:
            result[name] = mape(exact, predicted)
        except UndefinedMetricError:
            logger.warning(f"MAPE group {name} has only zero-valued entries; skipped")
    return result


def ae_mae(exp: Trajectory, model: Trajectory) -> MetricSet:
    """Absolute error per observable and time, and its time average."""
    if exp.n_qubits != model.n_qubits:
        raise DimensionMismatchError("Trajectories describe different qubit counts")
    if exp.n_times != model.n_times or not np.allclose(
        exp.times, model.times, rtol=0, atol=1e-12
    ):
        raise DimensionMismatchError("Trajectories are sampled on different time grids")
    ae = np.abs(exp.values - model.values)
    mae = dict(zip(exp.labels, ae.mean(axis=1).tolist()))
    return MetricSet(ae=ae, mae=mae)


def trajectory_mape(
    exact: Trajectory,
    predicted: Trajectory,
    floor: float = DEFAULT_RECONSTRUCTION_FLOOR,
) -> Tuple[float, int]:
    """MAPE over trajectory entries with |exact| >= ``floor``.

    Returns:
        (mape, number of excluded entries)
    """
    if exact.values.shape != predicted.values.shape:
        raise DimensionMismatchError(
            f"Trajectory shapes differ: {exact.values.shape} vs "
            f"{predicted.values.shape}"
        )
    values = exact.values.ravel()
    keep = np.abs(values) >= floor
    excluded = int(values.size - keep.sum())
    if not keep.any():
        raise UndefinedMetricError(
            f"Trajectory MAPE undefined: no entry reaches |value| >= {floor}"
        )
    predicted_values = predicted.values.ravel()
    ratios = np.abs(values[keep] - predicted_values[keep]) / np.abs(values[keep])
    return float(np.mean(ratios)), excluded


def summarize(values: Sequence[float]) -> Dict[str, float]:
    """mean, median, min and max of finite values (NaN when there are none)."""
    arr = np.asarray([v for v in values if v is not None], dtype=float)
    arr = arr[np.isfinite(arr)]
    if arr.size == 0:
        nan = float("nan")
        return {"mean": nan, "median": nan, "min": nan, "max": nan}
    return {
        "mean": float(np.mean(arr)),
        "median": float(np.median(arr)),
        "min": float(np.min(arr)),
        "max": float(np.max(arr)),
    }
