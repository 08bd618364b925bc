"""Data models for pinnverse.

Core data structures for physical parameters, decoherence channels,
observable trajectories, trainable masks and fit reports.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from pinnverse.core.pauli import (
    ObservableBasis,
    PauliString,
    lowering_raising,
    pauli_matrix,
)
from pinnverse.error_handling import DimensionMismatchError

logger = logging.getLogger(__name__)


def _j_label(index: int, n_qubits: int) -> str:
    s = PauliString.from_index(index, n_qubits)
    return "J_" + "_".join(str(label) for label in s.indices)


@dataclass
class ParameterSet:
    """Physical unknowns: Hamiltonian coefficients J and decay rates gamma.

    ``J`` has one entry per Pauli string including the identity (length
    4**n, base-4 order); the identity entry is fixed at zero. Units are
    angular frequency (rad per time unit, hbar = 1).
    """

    n_qubits: int
    J: np.ndarray
    gamma: np.ndarray

    def __post_init__(self) -> None:
        if self.n_qubits not in (1, 2):
            raise ValueError(f"Unsupported qubit count: {self.n_qubits}")
        self.J = np.array(self.J, dtype=float).reshape(-1)
        self.gamma = np.array(self.gamma, dtype=float).reshape(-1)
        if self.J.shape != (4**self.n_qubits,):
            raise DimensionMismatchError(
                f"J needs {4 ** self.n_qubits} entries for {self.n_qubits} "
                f"qubit(s), got {self.J.shape[0]}"
            )
        if self.J[0] != 0.0:
            raise ValueError("The all-identity coefficient J_0 must be exactly 0")
        if np.any(self.gamma < 0):
            raise ValueError(f"Decay rates must be nonnegative, got {self.gamma}")

    @classmethod
    def zeros(cls, n_qubits: int, n_channels: int) -> "ParameterSet":
        return cls(n_qubits, np.zeros(4**n_qubits), np.zeros(n_channels))

    @classmethod
    def from_nonidentity(
        cls, n_qubits: int, j_values: Sequence[float], gamma: Sequence[float]
    ) -> "ParameterSet":
        """Build from the 4**n - 1 non-identity J values (basis order)."""
        return cls(n_qubits, np.concatenate([[0.0], np.asarray(j_values)]), gamma)

    @property
    def j_nonidentity(self) -> np.ndarray:
        return self.J[1:]

    @property
    def j_grid(self) -> np.ndarray:
        """J as a 4x4 grid J[mu, nu] (2 qubits) or a length-4 vector (1 qubit)."""
        return self.J.reshape((4,) * self.n_qubits)

    @property
    def n_channels(self) -> int:
        return int(self.gamma.shape[0])

    @property
    def j_labels(self) -> List[str]:
        return [_j_label(i, self.n_qubits) for i in range(1, 4**self.n_qubits)]

    @property
    def gamma_labels(self) -> List[str]:
        return [f"gamma_{k + 1}" for k in range(self.n_channels)]

    @property
    def labels(self) -> List[str]:
        return self.j_labels + self.gamma_labels

    def vector(self) -> np.ndarray:
        """Concatenated (non-identity J, gamma) vector, aligned with ``labels``."""
        return np.concatenate([self.j_nonidentity, self.gamma])

    def copy(self) -> "ParameterSet":
        return ParameterSet(self.n_qubits, self.J.copy(), self.gamma.copy())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_qubits": self.n_qubits,
            "J": dict(zip(self.j_labels, self.j_nonidentity.tolist())),
            "gamma": self.gamma.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ParameterSet":
        n_qubits = int(data["n_qubits"])
        j_data = data["J"]
        if isinstance(j_data, dict):
            j_values = [
                float(j_data.get(_j_label(i, n_qubits), 0.0))
                for i in range(1, 4**n_qubits)
            ]
        else:
            j_values = [float(v) for v in j_data]
        return cls.from_nonidentity(n_qubits, j_values, data["gamma"])


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """Ordered Lindblad jump operators with labels.

    Compared and hashed by identity; presets are cached singletons.
    ``fingerprint`` identifies the contents.
    """

    name: str
    operators: Tuple[np.ndarray, ...]
    labels: Tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.operators) != len(self.labels):
            raise DimensionMismatchError("Each Lindblad operator needs one label")
        dims = {op.shape for op in self.operators}
        if len(dims) > 1:
            raise DimensionMismatchError(f"Mixed operator shapes: {dims}")

    def __len__(self) -> int:
        return len(self.operators)

    @property
    def fingerprint(self) -> Tuple[Any, ...]:
        """Hashable (name, labels, operator shapes and entries)."""
        ops = tuple(
            (op.shape, np.ascontiguousarray(op, dtype=complex).tobytes())
            for op in self.operators
        )
        return (self.name, self.labels, ops)

    @property
    def n_qubits(self) -> int:
        return int(np.log2(self.operators[0].shape[0]))

    def check_rates(self, gamma: np.ndarray) -> None:
        if len(gamma) != len(self):
            raise DimensionMismatchError(
                f"{len(self)} channels but {len(gamma)} decay rates"
            )


@lru_cache(maxsize=None)
def two_qubit_standard() -> ChannelSet:
    """Amplitude damping and dephasing on each qubit."""
    s0, s3, sm = pauli_matrix(0), pauli_matrix(3), lowering_raising("minus")
    return ChannelSet(
        name="two_qubit_standard",
        operators=(
            np.kron(sm, s0),
            np.kron(s3, s0),
            np.kron(s0, sm),
            np.kron(s0, s3),
        ),
        labels=("sigma_minus x I", "sigma_3 x I", "I x sigma_minus", "I x sigma_3"),
    )


@lru_cache(maxsize=None)
def one_qubit_finite_t() -> ChannelSet:
    """Dephasing plus amplitude damping at finite temperature."""
    return ChannelSet(
        name="one_qubit_finite_t",
        operators=(
            pauli_matrix(3),
            lowering_raising("minus"),
            lowering_raising("plus"),
        ),
        labels=("sigma_3", "sigma_minus", "sigma_plus"),
    )


CHANNEL_PRESETS = {
    "two_qubit_standard": two_qubit_standard,
    "one_qubit_finite_t": one_qubit_finite_t,
}


def channel_preset(name: str) -> ChannelSet:
    try:
        return CHANNEL_PRESETS[name]()
    except KeyError:
        raise ValueError(
            f"Unknown channel preset: {name}. "
            f"Must be one of: {', '.join(CHANNEL_PRESETS)}"
        ) from None


def default_channels(n_qubits: int) -> ChannelSet:
    return two_qubit_standard() if n_qubits == 2 else one_qubit_finite_t()


@dataclass
class Trajectory:
    """Observable expectation values on a time grid.

    ``values`` has one row per basis observable and one column per time.
    """

    times: np.ndarray
    values: np.ndarray
    n_qubits: int

    def __post_init__(self) -> None:
        self.times = np.array(self.times, dtype=float).reshape(-1)
        self.values = np.array(self.values, dtype=float)
        if self.times.size == 0:
            raise ValueError("Trajectory needs at least one time point")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("Trajectory times must be strictly increasing")
        expected = (4**self.n_qubits - 1, self.times.size)
        if self.values.shape != expected:
            raise DimensionMismatchError(
                f"Trajectory values must have shape {expected}, "
                f"got {self.values.shape}"
            )

    @property
    def basis(self) -> ObservableBasis:
        return ObservableBasis.for_qubits(self.n_qubits)

    @property
    def labels(self) -> List[str]:
        return self.basis.labels

    @property
    def n_times(self) -> int:
        return int(self.times.size)

    @property
    def initial_values(self) -> np.ndarray:
        return self.values[:, 0].copy()

    def copy(self) -> "Trajectory":
        return Trajectory(self.times.copy(), self.values.copy(), self.n_qubits)

    def subset(self, indices: Sequence[int]) -> "Trajectory":
        idx = np.asarray(indices, dtype=int)
        return Trajectory(self.times[idx], self.values[:, idx], self.n_qubits)

    def equally_spaced_subset(self, n_points: int) -> "Trajectory":
        """``n_points`` samples spread evenly over the grid, endpoints included.

        Indices are the rounded positions of an even spread, so the gaps are
        all equal only when ``n_points - 1`` divides ``n_times - 1``. Otherwise
        they differ by one grid step (201 samples thinned to 50 mix gaps of
        4 and 5) and an info message says so.
        """
        if n_points >= self.n_times:
            return self.copy()
        if n_points == 1:
            return self.subset([0])
        idx = np.unique(np.round(np.linspace(0, self.n_times - 1, n_points)))
        gaps = np.unique(np.diff(idx))
        if gaps.size > 1:
            logger.info(
                f"{n_points} of {self.n_times} samples are not evenly spaced: "
                f"gaps of {int(gaps.min())} to {int(gaps.max())} grid steps"
            )
        return self.subset(idx.astype(int))


@dataclass
class TrainableMask:
    """Which J entries and decay rates are free; masked ones are fixed at 0."""

    j: np.ndarray
    gamma: np.ndarray

    def __post_init__(self) -> None:
        self.j = np.array(self.j, dtype=bool).reshape(-1)
        self.gamma = np.array(self.gamma, dtype=bool).reshape(-1)
        if self.j.size not in (4, 16):
            raise DimensionMismatchError(
                f"J mask needs 4 or 16 entries, got {self.j.size}"
            )
        if self.j[0]:
            raise ValueError("The identity coefficient can never be trainable")

    @property
    def n_qubits(self) -> int:
        return 1 if self.j.size == 4 else 2

    @classmethod
    def all(cls, n_qubits: int, n_channels: int) -> "TrainableMask":
        j = np.ones(4**n_qubits, dtype=bool)
        j[0] = False
        return cls(j, np.ones(n_channels, dtype=bool))

    @classmethod
    def j_off(cls, n_qubits: int, n_channels: int) -> "TrainableMask":
        return cls(np.zeros(4**n_qubits, dtype=bool), np.ones(n_channels, dtype=bool))

    @classmethod
    def from_predicate(
        cls,
        n_qubits: int,
        n_channels: int,
        keep: Callable[[PauliString], bool],
        gamma: bool = True,
    ) -> "TrainableMask":
        j = np.array(
            [
                i > 0 and bool(keep(PauliString.from_index(i, n_qubits)))
                for i in range(4**n_qubits)
            ]
        )
        return cls(j, np.full(n_channels, gamma, dtype=bool))

    @property
    def trainable_j(self) -> np.ndarray:
        """Indices into the full J vector."""
        return np.flatnonzero(self.j)

    @property
    def trainable_gamma(self) -> np.ndarray:
        return np.flatnonzero(self.gamma)

    @property
    def n_trainable(self) -> int:
        return int(self.j.sum() + self.gamma.sum())

    def flags(self) -> np.ndarray:
        """Trainable flags aligned with ``ParameterSet.labels``."""
        return np.concatenate([self.j[1:], self.gamma])

    def to_dict(self) -> Dict[str, Any]:
        return {"j": self.j.tolist(), "gamma": self.gamma.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainableMask":
        return cls(data["j"], data["gamma"])


@dataclass
class LossRecord:
    """Loss terms at one logged optimizer step."""

    step: int
    total: float
    physics: float
    data: float


@dataclass
class RunSummary:
    """Outcome of one restart of a fit."""

    seed: int
    status: str  # "ok" or "failed"
    steps: int = 0
    final_loss: Optional[float] = None
    recovered: Optional[ParameterSet] = None
    message: str = ""
    wall_time: Optional[float] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "status": self.status,
            "steps": self.steps,
            "final_loss": self.final_loss,
            "recovered": self.recovered.to_dict() if self.recovered else None,
            "message": self.message,
            "wall_time": self.wall_time,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunSummary":
        recovered = data.get("recovered")
        return cls(
            seed=int(data["seed"]),
            status=data["status"],
            steps=int(data.get("steps", 0)),
            final_loss=data.get("final_loss"),
            recovered=ParameterSet.from_dict(recovered) if recovered else None,
            message=data.get("message", ""),
            wall_time=data.get("wall_time"),
        )


@dataclass
class MetricSet:
    """Parameter and trajectory error metrics.

    ``mape`` maps a parameter group (``J_mean``, ``gamma_mean``, ``gamma_1``,
    ...) to its fractional MAPE. ``ae`` holds per-time absolute errors, one
    row per observable, and ``mae`` the per-observable time average.
    """

    mape: Dict[str, float] = field(default_factory=dict)
    ae: Optional[np.ndarray] = None
    mae: Dict[str, float] = field(default_factory=dict)
    excluded: Dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mape": dict(self.mape),
            "ae": self.ae.tolist() if self.ae is not None else None,
            "mae": dict(self.mae),
            "excluded": dict(self.excluded),
        }


@dataclass
class FitReport:
    """Everything a PINNverse fit produced."""

    n_qubits: int
    channels: str
    recovered: ParameterSet
    trainable: TrainableMask
    initial_state: np.ndarray
    final_time: float
    seeds: List[int]
    best_seed: int
    loss_history: List[LossRecord] = field(default_factory=list)
    runs: List[RunSummary] = field(default_factory=list)
    truth: Optional[ParameterSet] = None
    errors: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    mape: Dict[str, float] = field(default_factory=dict)
    reconstruction: Optional[Trajectory] = None
    wall_time: Optional[float] = None
    # best restart network (NetState); not serialized
    state: Optional[Any] = field(default=None, repr=False, compare=False)

    @property
    def ok_runs(self) -> List[RunSummary]:
        return [run for run in self.runs if run.ok]

    @property
    def final_loss(self) -> Optional[float]:
        for run in self.runs:
            if run.seed == self.best_seed:
                return run.final_loss
        return None

    def to_dict(self) -> Dict[str, Any]:
        reconstruction = None
        if self.reconstruction is not None:
            reconstruction = {
                "times": self.reconstruction.times.tolist(),
                "labels": self.reconstruction.labels,
                "values": self.reconstruction.values.tolist(),
            }
        return {
            "format": "pinnverse-fit-report/1",
            "n_qubits": self.n_qubits,
            "channels": self.channels,
            "parameters": self.recovered.to_dict(),
            "trainable": self.trainable.to_dict(),
            "initial_state": self.initial_state.tolist(),
            "final_time": self.final_time,
            "truth": self.truth.to_dict() if self.truth else None,
            "errors": self.errors,
            "mape": self.mape,
            "loss_history": [vars(record) for record in self.loss_history],
            "seeds": list(self.seeds),
            "best_seed": self.best_seed,
            "runs": [run.to_dict() for run in self.runs],
            "reconstruction": reconstruction,
            "timing": {"wall_time": self.wall_time},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FitReport":
        n_qubits = int(data["n_qubits"])
        reconstruction = None
        if data.get("reconstruction"):
            rec = data["reconstruction"]
            reconstruction = Trajectory(rec["times"], rec["values"], n_qubits)
        truth = data.get("truth")
        return cls(
            n_qubits=n_qubits,
            channels=data["channels"],
            recovered=ParameterSet.from_dict(data["parameters"]),
            trainable=TrainableMask.from_dict(data["trainable"]),
            initial_state=np.asarray(data["initial_state"], dtype=float),
            final_time=float(data["final_time"]),
            seeds=[int(s) for s in data["seeds"]],
            best_seed=int(data["best_seed"]),
            loss_history=[LossRecord(**record) for record in data["loss_history"]],
            runs=[RunSummary.from_dict(run) for run in data["runs"]],
            truth=ParameterSet.from_dict(truth) if truth else None,
            errors=data.get("errors", {}),
            mape=data.get("mape", {}),
            reconstruction=reconstruction,
            wall_time=data.get("timing", {}).get("wall_time"),
        )
