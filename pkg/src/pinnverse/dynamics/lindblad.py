"""Density-matrix Lindblad master equation: the ground-truth oracle.

Integrates d rho/dt = i[rho, H] + sum_k gamma_k (L rho L^+ - 1/2 {L^+ L, rho})
with hbar = 1 and reads out Pauli-string expectation values.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from pinnverse.core.models import ChannelSet, ParameterSet, Trajectory
from pinnverse.core.pauli import (
    ObservableBasis,
    adjoint,
    anticommutator,
    commutator,
    hermiticity_error,
)
from pinnverse.dynamics.integrators import DEFAULT_STEPS, integrate_fixed_grid
from pinnverse.dynamics.liouvillian import build_hamiltonian
from pinnverse.error_handling import DimensionMismatchError, IntegrationError

logger = logging.getLogger(__name__)

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-9
POSITIVITY_TOL = 1e-8
IMAGINARY_TOL = 1e-10


@dataclass
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite state."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        self.matrix = np.array(self.matrix, dtype=complex)
        dim = self.matrix.shape[0]
        if self.matrix.shape != (dim, dim) or dim not in (2, 4):
            raise DimensionMismatchError(
                f"Density matrix must be 2x2 or 4x4, got {self.matrix.shape}"
            )

    @property
    def n_qubits(self) -> int:
        return 1 if self.matrix.shape[0] == 2 else 2

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.matrix + adjoint(self.matrix)))[0])

    def expectations(self, basis: ObservableBasis) -> np.ndarray:
        """Real vector of Tr(rho S_a) over the observable basis."""
        return expectations(self.matrix, basis)


def expectations(rho: np.ndarray, basis: ObservableBasis) -> np.ndarray:
    values = np.einsum("aij,ji->a", basis.matrices, rho)
    residue = float(np.max(np.abs(values.imag)))
    if residue > IMAGINARY_TOL:
        raise ValueError(f"Expectation values carry imaginary residue {residue:.2e}")
    return values.real


def plus_plus_state(n_qubits: int) -> DensityMatrix:
    """|+>^n <+|^n: every entry equals 1 / 2**n."""
    if n_qubits not in (1, 2):
        raise ValueError(f"Unsupported qubit count: {n_qubits}")
    dim = 2**n_qubits
    return DensityMatrix(np.full((dim, dim), 1.0 / dim, dtype=complex))


def _check_rates(channels: ChannelSet, gamma: np.ndarray) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=float).reshape(-1)
    channels.check_rates(gamma)
    if np.any(gamma < 0):
        raise ValueError(f"Decay rates must be nonnegative, got {gamma}")
    return gamma


def lindblad_rhs(
    rho: DensityMatrix,
    H: np.ndarray,
    channels: ChannelSet,
    gamma: Sequence[float],
) -> np.ndarray:
    """Right-hand side of the master equation for one state."""
    gamma = _check_rates(channels, np.asarray(gamma))
    m = rho.matrix
    if H.shape != m.shape or channels.operators[0].shape != m.shape:
        raise DimensionMismatchError(
            f"State {m.shape}, Hamiltonian {H.shape} and channels "
            f"{channels.operators[0].shape} disagree"
        )
    out = 1j * commutator(m, H)
    for rate, op in zip(gamma, channels.operators):
        if rate == 0.0:
            continue
        op_dag = adjoint(op)
        out += rate * (op @ m @ op_dag - 0.5 * anticommutator(op_dag @ op, m))
    return out


class _LindbladGenerator:
    """Master-equation right-hand side with the fixed operators folded in.

    Uses the effective non-Hermitian Hamiltonian H - i/2 sum gamma L^+L,
    algebraically identical to :func:`lindblad_rhs`.
    """

    def __init__(self, H: np.ndarray, channels: ChannelSet, gamma: np.ndarray) -> None:
        active = [(g, op) for g, op in zip(gamma, channels.operators) if g != 0.0]
        self.h_eff = H.astype(complex) - 0.5j * sum(
            (g * adjoint(op) @ op for g, op in active),
            np.zeros_like(H, dtype=complex),
        )
        self.h_eff_dag = adjoint(self.h_eff)
        self.jumps = [(g, op, adjoint(op)) for g, op in active]

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        out = -1j * (self.h_eff @ rho - rho @ self.h_eff_dag)
        for g, op, op_dag in self.jumps:
            out += g * (op @ rho @ op_dag)
        return out


def evolve(
    rho0: DensityMatrix,
    params: ParameterSet,
    channels: ChannelSet,
    times: Sequence[float],
    n_steps: int = DEFAULT_STEPS,
    final_time: Optional[float] = None,
) -> Trajectory:
    """Integrate the master equation and sample the observable trajectory.

    Raises:
        IntegrationError: trace drift, Hermiticity loss or negative
            eigenvalues beyond tolerance at a sampled time
    """
    if rho0.n_qubits != params.n_qubits or channels.n_qubits != params.n_qubits:
        raise DimensionMismatchError("Initial state, parameters and channels disagree")
    gamma = _check_rates(channels, params.gamma)
    basis = ObservableBasis.for_qubits(params.n_qubits)
    generator = _LindbladGenerator(build_hamiltonian(params), channels, gamma)

    def check(t: float, rho: np.ndarray) -> None:
        trace_drift = abs(np.trace(rho) - 1.0)
        if trace_drift > TRACE_TOL:
            raise IntegrationError(f"Trace drifted by {trace_drift:.2e}", time=t)
        herm = hermiticity_error(rho)
        if herm > HERMITICITY_TOL:
            raise IntegrationError(f"Hermiticity lost ({herm:.2e})", time=t)
        lowest = float(np.linalg.eigvalsh(0.5 * (rho + adjoint(rho)))[0])
        if lowest < -POSITIVITY_TOL:
            raise IntegrationError(f"Negative eigenvalue {lowest:.2e}", time=t)

    states = integrate_fixed_grid(
        generator,
        rho0.matrix,
        times,
        n_steps=n_steps,
        final_time=final_time,
        observer=check,
    )
    values = np.einsum("aij,tji->at", basis.matrices, states)
    residue = float(np.max(np.abs(values.imag)))
    if residue > IMAGINARY_TOL:
        raise IntegrationError(
            f"Expectation values carry imaginary residue {residue:.2e}",
            time=float(np.asarray(times)[-1]),
        )
    logger.debug(f"Evolved {params.n_qubits}-qubit state over {len(values[0])} samples")
    return Trajectory(np.asarray(times, dtype=float), values.real, params.n_qubits)
