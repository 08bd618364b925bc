"""Affine generator of the observable dynamics in the Pauli basis.

For parameters (J, gamma) the vector s of basis expectation values obeys
ds/dt = A s + b. Row a comes from the Heisenberg-picture operator

    M_a = -i[S_a, H] + sum_k gamma_k (L_k^+ S_a L_k - 1/2 {S_a, L_k^+ L_k})

decomposed on the basis: A[a, c] = Tr(S_c M_a) / 2**n and
b[a] = Tr(M_a) / 2**n. Both are linear in (J, gamma), so the unit-parameter
generators are built once and reused for every parameter update.
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from pinnverse.core.models import ChannelSet, ParameterSet, Trajectory
from pinnverse.core.pauli import (
    ObservableBasis,
    PauliString,
    adjoint,
    anticommutator,
    commutator,
    pauli_decompose,
    pauli_string_matrix,
)
from pinnverse.dynamics.integrators import DEFAULT_STEPS, integrate_fixed_grid
from pinnverse.error_handling import DimensionMismatchError, GeneratorConsistencyError

logger = logging.getLogger(__name__)

IMAGINARY_TOL = 1e-10


def build_hamiltonian(params: ParameterSet) -> np.ndarray:
    """H = sum_a J_a S_a (hbar = 1); the identity coefficient is always 0."""
    dim = 2**params.n_qubits
    H = np.zeros((dim, dim), dtype=complex)
    for index in np.flatnonzero(params.J):
        if index == 0:
            continue
        s = PauliString.from_index(int(index), params.n_qubits)
        H += params.J[index] * pauli_string_matrix(s)
    return H


def _heisenberg_rows(
    operator_builder: Callable[[np.ndarray], np.ndarray], basis: ObservableBasis
) -> Tuple[np.ndarray, np.ndarray]:
    """Decompose M_a = operator_builder(S_a) for every basis element."""
    A = np.zeros((basis.size, basis.size), dtype=complex)
    b = np.zeros(basis.size, dtype=complex)
    for a, s_a in enumerate(basis.matrices):
        coeffs, identity_coeff = pauli_decompose(operator_builder(s_a), basis)
        A[a] = coeffs
        b[a] = identity_coeff
    residue = max(float(np.max(np.abs(A.imag))), float(np.max(np.abs(b.imag))))
    if residue > IMAGINARY_TOL:
        raise GeneratorConsistencyError(
            f"Generator has imaginary residue {residue:.2e}; check the sign convention"
        )
    return A.real, b.real


def hamiltonian_part(
    H: np.ndarray, basis: ObservableBasis
) -> Tuple[np.ndarray, np.ndarray]:
    return _heisenberg_rows(lambda s: -1j * commutator(s, H), basis)


def dissipator_part(
    operator: np.ndarray, basis: ObservableBasis
) -> Tuple[np.ndarray, np.ndarray]:
    """Unit-rate contribution of one jump operator."""
    op_dag = adjoint(operator)
    decay = op_dag @ operator

    def heisenberg(s: np.ndarray) -> np.ndarray:
        return op_dag @ s @ operator - 0.5 * anticommutator(s, decay)

    return _heisenberg_rows(heisenberg, basis)


@dataclass(frozen=True)
class GeneratorGradients:
    """Constant derivatives of (A, b) with respect to every parameter.

    ``dA_dJ[c]`` belongs to the non-identity coefficient J_{c+1};
    ``dA_dgamma[k]`` to channel k. The Hamiltonian never feeds ``b``.
    """

    dA_dJ: np.ndarray
    db_dJ: np.ndarray
    dA_dgamma: np.ndarray
    db_dgamma: np.ndarray


@dataclass(frozen=True)
class AffineGenerator:
    """ds/dt = A s + b together with its parameter derivatives."""

    A: np.ndarray
    b: np.ndarray
    parameter_gradients: GeneratorGradients

    @property
    def size(self) -> int:
        return int(self.b.shape[0])


class GeneratorFactory:
    """Unit-parameter generators for one (qubit count, channel set) pair.

    Assembling a generator from parameters is a contraction with the
    cached derivatives, with no operator algebra per call.
    """

    def __init__(
        self, channels: ChannelSet, basis: Optional[ObservableBasis] = None
    ) -> None:
        self.channels = channels
        self.basis = basis or ObservableBasis.for_qubits(channels.n_qubits)
        if self.basis.n_qubits != channels.n_qubits:
            raise DimensionMismatchError(
                "Basis and channel set act on different qubits"
            )

        size = self.basis.size
        dA_dJ = np.zeros((size, size, size))
        for c, s_c in enumerate(self.basis.matrices):
            dA_dJ[c], _ = hamiltonian_part(s_c, self.basis)
        dA_dgamma = np.zeros((len(channels), size, size))
        db_dgamma = np.zeros((len(channels), size))
        for k, op in enumerate(channels.operators):
            dA_dgamma[k], db_dgamma[k] = dissipator_part(op, self.basis)

        for array in (dA_dJ, dA_dgamma, db_dgamma):
            array.setflags(write=False)
        db_dJ = np.zeros((size, size))
        db_dJ.setflags(write=False)
        self.gradients = GeneratorGradients(dA_dJ, db_dJ, dA_dgamma, db_dgamma)
        logger.debug(
            f"Built generator factory: {size} observables, {len(channels)} channels"
        )

    def assemble(
        self, j_nonidentity: np.ndarray, gamma: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray]:
        """A and b for raw parameter vectors (no validation, used in training)."""
        g = self.gradients
        A = np.tensordot(j_nonidentity, g.dA_dJ, axes=1) + np.tensordot(
            gamma, g.dA_dgamma, axes=1
        )
        b = np.tensordot(gamma, g.db_dgamma, axes=1)
        return A, b

    def build(self, params: ParameterSet) -> AffineGenerator:
        if params.n_qubits != self.basis.n_qubits:
            raise DimensionMismatchError(
                "Parameters and factory act on different qubits"
            )
        self.channels.check_rates(params.gamma)
        A, b = self.assemble(params.j_nonidentity, params.gamma)
        return AffineGenerator(A=A, b=b, parameter_gradients=self.gradients)


FACTORY_CACHE_SIZE = 16


@dataclass(frozen=True)
class _ChannelKey:
    fingerprint: Tuple[Any, ...]
    channels: ChannelSet = field(compare=False)


@lru_cache(maxsize=FACTORY_CACHE_SIZE)
def _factory_for(key: _ChannelKey) -> GeneratorFactory:
    return GeneratorFactory(key.channels)


def generator_factory(channels: ChannelSet) -> GeneratorFactory:
    """Shared factory per channel-set contents (least recently used evicted)."""
    return _factory_for(_ChannelKey(channels.fingerprint, channels))


def build_generator(
    params: ParameterSet,
    channels: ChannelSet,
    basis: Optional[ObservableBasis] = None,
) -> AffineGenerator:
    """Pauli-basis generator for ``params`` under ``channels``."""
    if basis is not None and basis.n_qubits != params.n_qubits:
        raise DimensionMismatchError("Basis and parameters act on different qubits")
    return generator_factory(channels).build(params)


def rhs(gen: AffineGenerator, s: np.ndarray) -> np.ndarray:
    """A s + b."""
    s = np.asarray(s, dtype=float)
    if s.shape != (gen.size,):
        raise DimensionMismatchError(
            f"State vector needs {gen.size} entries, got shape {s.shape}"
        )
    return gen.A @ s + gen.b


def evolve_pauli(
    gen: AffineGenerator,
    s0: np.ndarray,
    times: Sequence[float],
    n_steps: int = DEFAULT_STEPS,
    final_time: Optional[float] = None,
) -> Trajectory:
    """RK4 on ds/dt = A s + b on the same internal grid as the density path."""
    s0 = np.asarray(s0, dtype=float)
    if s0.shape != (gen.size,):
        raise DimensionMismatchError(
            f"Initial vector needs {gen.size} entries, got shape {s0.shape}"
        )
    A, b = gen.A, gen.b
    states = integrate_fixed_grid(
        lambda s: A @ s + b, s0, times, n_steps=n_steps, final_time=final_time
    )
    n_qubits = 1 if gen.size == 3 else 2
    return Trajectory(np.asarray(times, dtype=float), states.T, n_qubits)


def write_generator_csv(
    gen: AffineGenerator, path: Union[str, Path], labels: Optional[Sequence[str]] = None
) -> Path:
    """Debug dump: one row per observable, columns A[:, c] then b."""
    path = Path(path)
    if labels is None:
        labels = ObservableBasis.for_qubits(1 if gen.size == 3 else 2).labels
    frame = pd.DataFrame(gen.A, index=list(labels), columns=list(labels))
    frame["b"] = gen.b
    frame.index.name = "row"
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, float_format="%.17g")
    logger.info(f"Wrote generator dump to {path}")
    return path
