"""Dense Pauli algebra for one and two qubits.

Operators are plain ``numpy`` complex arrays of shape (2**n, 2**n). The
observable basis is the ordered list of non-identity Pauli strings,
lexicographic in the per-qubit labels, so ``S_{0,1}`` is index 0 for two
qubits and ``sigma_1`` is index 0 for one qubit.
"""

import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache, reduce
from typing import List, Literal, Sequence, Tuple

import numpy as np

from pinnverse.error_handling import DimensionMismatchError

logger = logging.getLogger(__name__)

SUPPORTED_QUBITS = (1, 2)

ONE_QUBIT_LABELS = ("sx", "sy", "sz")

_PAULI = (
    np.array([[1, 0], [0, 1]], dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def pauli_matrix(label: int) -> np.ndarray:
    """Return sigma_label for label in {0, 1, 2, 3} (0 is the identity)."""
    if label not in (0, 1, 2, 3):
        raise ValueError(f"Invalid Pauli label: {label}. Must be 0, 1, 2 or 3")
    return _PAULI[label].copy()


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-qubit Pauli labels, one per qubit."""

    indices: Tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.indices) not in SUPPORTED_QUBITS:
            raise ValueError(
                f"Pauli strings must span 1 or 2 qubits, got {len(self.indices)}"
            )
        for label in self.indices:
            if label not in (0, 1, 2, 3):
                raise ValueError(f"Invalid Pauli label: {label}")

    @property
    def n_qubits(self) -> int:
        return len(self.indices)

    @property
    def index(self) -> int:
        """Base-4 index; the all-identity string is 0."""
        return reduce(lambda acc, label: 4 * acc + label, self.indices, 0)

    @property
    def is_identity(self) -> bool:
        return all(label == 0 for label in self.indices)

    @property
    def is_two_body(self) -> bool:
        """True when every qubit carries a non-identity Pauli (crosstalk term)."""
        return self.n_qubits == 2 and all(label != 0 for label in self.indices)

    @property
    def label(self) -> str:
        """Column name used in data files: ``S_mu_nu`` or ``sx``/``sy``/``sz``."""
        if self.n_qubits == 1:
            return ONE_QUBIT_LABELS[self.indices[0] - 1] if self.indices[0] else "id"
        return "S_" + "_".join(str(label) for label in self.indices)

    @classmethod
    def from_index(cls, index: int, n_qubits: int) -> "PauliString":
        if not 0 <= index < 4**n_qubits:
            raise ValueError(f"Index {index} out of range for {n_qubits} qubit(s)")
        digits: List[int] = []
        for _ in range(n_qubits):
            digits.append(index % 4)
            index //= 4
        return cls(tuple(reversed(digits)))

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Parse ``S_1_2``, ``S_3`` or ``sx``/``sy``/``sz``."""
        if label in ONE_QUBIT_LABELS:
            return cls((ONE_QUBIT_LABELS.index(label) + 1,))
        parts = label.split("_")
        if parts[0] != "S" or len(parts) < 2:
            raise ValueError(f"Unrecognized Pauli string label: {label!r}")
        try:
            return cls(tuple(int(p) for p in parts[1:]))
        except ValueError as e:
            raise ValueError(f"Unrecognized Pauli string label: {label!r}") from e


def pauli_string_matrix(s: PauliString) -> np.ndarray:
    """Kronecker product of the per-qubit Pauli matrices."""
    return reduce(np.kron, (_PAULI[label] for label in s.indices))


def lowering_raising(which: Literal["minus", "plus"]) -> np.ndarray:
    """sigma_minus = (sigma_1 - i sigma_2) / 2, or its adjoint sigma_plus."""
    minus = (_PAULI[1] - 1j * _PAULI[2]) / 2
    if which == "minus":
        return minus
    if which == "plus":
        return adjoint(minus)
    raise ValueError(f"Invalid ladder operator: {which!r}. Must be 'minus' or 'plus'")


def _check_square_pair(a: np.ndarray, b: np.ndarray) -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"Expected a square matrix, got shape {a.shape}")
    if a.shape != b.shape:
        raise DimensionMismatchError(f"Shape mismatch: {a.shape} vs {b.shape}")


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _check_square_pair(a, b)
    return a @ b


def adjoint(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """[A, B] = AB - BA."""
    _check_square_pair(a, b)
    return a @ b - b @ a


def anticommutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """{A, B} = AB + BA."""
    _check_square_pair(a, b)
    return a @ b + b @ a


def hermiticity_error(m: np.ndarray) -> float:
    """max |M - M^dagger| over all entries."""
    return float(np.max(np.abs(m - adjoint(m))))


@dataclass(frozen=True)
class ObservableBasis:
    """The 4**n - 1 non-identity Pauli strings in lexicographic order."""

    n_qubits: int
    strings: Tuple[PauliString, ...]

    @classmethod
    def for_qubits(cls, n_qubits: int) -> "ObservableBasis":
        return _basis_for(n_qubits)

    @property
    def dim(self) -> int:
        """Hilbert-space dimension 2**n."""
        return 2**self.n_qubits

    @property
    def size(self) -> int:
        return len(self.strings)

    @property
    def labels(self) -> List[str]:
        return [s.label for s in self.strings]

    @property
    def matrices(self) -> np.ndarray:
        """Stacked basis operators, shape (size, dim, dim)."""
        return _basis_matrices(self.n_qubits)

    def __len__(self) -> int:
        return len(self.strings)

    def position(self, s: PauliString) -> int:
        """Row index of ``s`` in the basis (identity has none)."""
        if s.n_qubits != self.n_qubits or s.is_identity:
            raise ValueError(f"{s.label} is not an element of this basis")
        return s.index - 1


@lru_cache(maxsize=None)
def _basis_for(n_qubits: int) -> ObservableBasis:
    if n_qubits not in SUPPORTED_QUBITS:
        raise ValueError(f"Unsupported qubit count: {n_qubits}. Must be 1 or 2")
    strings = tuple(
        PauliString(indices)
        for indices in itertools.product(range(4), repeat=n_qubits)
        if any(indices)
    )
    return ObservableBasis(n_qubits=n_qubits, strings=strings)


@lru_cache(maxsize=None)
def _basis_matrices(n_qubits: int) -> np.ndarray:
    mats = np.stack([pauli_string_matrix(s) for s in _basis_for(n_qubits).strings])
    mats.setflags(write=False)
    return mats


def pauli_decompose(
    m: np.ndarray, basis: ObservableBasis
) -> Tuple[np.ndarray, complex]:
    """Coefficients of ``m`` on the basis plus its identity component.

    coeffs[a] = Tr(S_a M) / 2**n and identity_coeff = Tr(M) / 2**n.
    """
    if m.shape != (basis.dim, basis.dim):
        raise DimensionMismatchError(
            f"Matrix of shape {m.shape} does not match {basis.n_qubits}-qubit basis"
        )
    coeffs = np.einsum("aij,ji->a", basis.matrices, m) / basis.dim
    identity_coeff = complex(np.trace(m) / basis.dim)
    return coeffs, identity_coeff


def reconstruct(
    coeffs: Sequence[complex], identity_coeff: complex, basis: ObservableBasis
) -> np.ndarray:
    """Inverse of :func:`pauli_decompose`."""
    coeffs = np.asarray(coeffs, dtype=complex)
    if coeffs.shape != (basis.size,):
        raise DimensionMismatchError(
            f"Expected {basis.size} coefficients, got shape {coeffs.shape}"
        )
    m = np.einsum("a,aij->ij", coeffs, basis.matrices)
    return m + identity_coeff * np.eye(basis.dim, dtype=complex)
