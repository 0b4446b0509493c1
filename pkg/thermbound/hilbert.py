"""Computational basis, model Hamiltonian, observables and symmetry operators.

Basis convention: a basis code is an integer in ``[0, 2**N)``; bit ``j`` (0-indexed
from site 1, least significant first) is 0 for ``|Z+>_j`` and 1 for ``|Z->_j``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import eigsh
from scipy.sparse.linalg import norm as sparse_norm

from .errors import ThermboundInputError

DEFAULT_COUPLING = 1.0
DEFAULT_FIELD = DEFAULT_COUPLING / 2 + 0.01
HERMITICITY_TOLERANCE = 1e-12
DENSE_NORM_LIMIT = 4096


class Boundary(str, Enum):
    """Boundary condition of the chain."""

    PERIODIC = "periodic"
    OPEN = "open"


class Storage(str, Enum):
    """Storage layout of a HermitianOperator."""

    DENSE = "dense"
    DIAGONAL = "diagonal"
    SPARSE = "sparse"


def _freeze(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class ChainSpec:
    """Model parameters of the XY chain with a transverse y field."""

    n_spins: int
    coupling: float = DEFAULT_COUPLING
    field: float = DEFAULT_FIELD
    boundary: Boundary = Boundary.PERIODIC

    def __post_init__(self) -> None:
        try:
            boundary = Boundary(self.boundary)
        except ValueError as exc:
            allowed = ", ".join(item.value for item in Boundary)
            raise ThermboundInputError(
                f"Unknown boundary '{self.boundary}'. Expected one of: {allowed}."
            ) from exc
        object.__setattr__(self, "boundary", boundary)
        if isinstance(self.n_spins, bool) or not isinstance(self.n_spins, (int, np.integer)):
            raise ThermboundInputError(f"n_spins must be an integer, got {self.n_spins!r}.")
        object.__setattr__(self, "n_spins", int(self.n_spins))
        minimum = 3 if boundary is Boundary.PERIODIC else 2
        if self.n_spins < minimum:
            raise ThermboundInputError(
                f"{boundary.value} boundary needs n_spins >= {minimum}, got {self.n_spins}."
            )
        for name in ("coupling", "field"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float, np.floating, np.integer)):
                raise ThermboundInputError(f"{name} must be a real number, got {value!r}.")
            if not math.isfinite(float(value)):
                raise ThermboundInputError(f"{name} must be finite, got {value!r}.")
            object.__setattr__(self, name, float(value))

    @property
    def dimension(self) -> int:
        return 1 << self.n_spins

    def bonds(self) -> list[tuple[int, int]]:
        """Nearest-neighbour site pairs, wrapping around for periodic chains."""
        if self.boundary is Boundary.PERIODIC:
            return [(j, (j + 1) % self.n_spins) for j in range(self.n_spins)]
        return [(j, j + 1) for j in range(self.n_spins - 1)]

    def with_size(self, n_spins: int) -> "ChainSpec":
        return replace(self, n_spins=n_spins)

    def as_dict(self) -> dict[str, object]:
        return {
            "n_spins": self.n_spins,
            "coupling": self.coupling,
            "field": self.field,
            "boundary": self.boundary.value,
        }

    def cache_key(self) -> str:
        """Stable hash of the model parameters."""
        payload = json.dumps(
            {
                "n_spins": self.n_spins,
                "coupling": repr(self.coupling),
                "field": repr(self.field),
                "boundary": self.boundary.value,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def basis_codes(n_spins: int) -> np.ndarray:
    """All basis codes of an ``n_spins`` chain in ascending order."""
    if n_spins < 1:
        raise ThermboundInputError(f"n_spins must be >= 1, got {n_spins}.")
    return np.arange(1 << n_spins, dtype=np.int64)


def code_bits(code: int, n_spins: int) -> list[int]:
    """Site occupations of a basis code, site 1 first."""
    if not 0 <= code < (1 << n_spins):
        raise ThermboundInputError(f"Basis code {code} out of range for {n_spins} spins.")
    return [(code >> j) & 1 for j in range(n_spins)]


def assemble_code(bits: Sequence[int]) -> int:
    """Inverse of :func:`code_bits`."""
    code = 0
    for j, bit in enumerate(bits):
        if bit not in (0, 1):
            raise ThermboundInputError("Basis bits must be 0 or 1.")
        code |= bit << j
    return code


def popcount(codes: np.ndarray, n_spins: int) -> np.ndarray:
    counts = np.zeros(codes.shape, dtype=np.int64)
    for j in range(n_spins):
        counts += (codes >> j) & 1
    return counts


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """A Hermitian matrix on the spin Hilbert space.

    ``data`` is a 1-D real array for DIAGONAL storage, a 2-D array for DENSE
    storage and a CSR matrix for SPARSE storage.
    """

    storage: Storage
    data: np.ndarray | sparse.csr_matrix

    def __post_init__(self) -> None:
        if self.storage is Storage.DIAGONAL:
            values = np.asarray(self.data)
            if values.ndim != 1:
                raise ThermboundInputError("Diagonal storage needs a 1-D array.")
            if np.iscomplexobj(values):
                if np.any(values.imag != 0.0):
                    raise ThermboundInputError("Diagonal of a Hermitian operator must be real.")
                values = values.real
            object.__setattr__(self, "data", _freeze(np.array(values, dtype=np.float64)))
        elif self.storage is Storage.DENSE:
            matrix = np.array(self.data, dtype=np.complex128)
            if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
                raise ThermboundInputError("Dense storage needs a square matrix.")
            object.__setattr__(self, "data", _freeze(matrix))
        elif self.storage is Storage.SPARSE:
            matrix = sparse.csr_matrix(self.data, dtype=np.complex128)
            if matrix.shape[0] != matrix.shape[1]:
                raise ThermboundInputError("Sparse storage needs a square matrix.")
            matrix.sum_duplicates()
            object.__setattr__(self, "data", matrix)
        else:
            raise ThermboundInputError(f"Unknown storage {self.storage!r}.")

    @classmethod
    def diagonal(cls, values: Sequence[float] | np.ndarray) -> "HermitianOperator":
        return cls(Storage.DIAGONAL, np.asarray(values))

    @classmethod
    def dense(cls, matrix: np.ndarray) -> "HermitianOperator":
        return cls(Storage.DENSE, matrix)

    @classmethod
    def from_entries(
        cls,
        dimension: int,
        rows: np.ndarray,
        cols: np.ndarray,
        values: np.ndarray,
    ) -> "HermitianOperator":
        """Assemble from an entry list; repeated (row, col) entries are summed."""
        matrix = sparse.coo_matrix(
            (np.asarray(values, dtype=np.complex128), (rows, cols)),
            shape=(dimension, dimension),
        ).tocsr()
        return cls(Storage.SPARSE, matrix)

    @classmethod
    def identity(cls, dimension: int) -> "HermitianOperator":
        return cls.diagonal(np.ones(dimension))

    @property
    def dimension(self) -> int:
        return int(self.data.shape[0])

    def to_dense(self) -> np.ndarray:
        if self.storage is Storage.DIAGONAL:
            return np.diag(self.data.astype(np.complex128))
        if self.storage is Storage.DENSE:
            return np.array(self.data)
        return self.data.toarray()

    def to_sparse(self) -> sparse.csr_matrix:
        if self.storage is Storage.DIAGONAL:
            return sparse.diags(self.data.astype(np.complex128), format="csr")
        if self.storage is Storage.DENSE:
            return sparse.csr_matrix(self.data)
        return self.data

    def apply(self, vectors: np.ndarray) -> np.ndarray:
        """Return ``A @ vectors`` for a vector or a matrix of column vectors."""
        vectors = np.asarray(vectors)
        if vectors.shape[0] != self.dimension:
            raise ThermboundInputError(
                f"Operator dimension {self.dimension} does not match vector length {vectors.shape[0]}."
            )
        if self.storage is Storage.DIAGONAL:
            if vectors.ndim == 1:
                return self.data * vectors
            return self.data[:, None] * vectors
        return np.asarray(self.data @ vectors)

    def expectation(self, psi: np.ndarray) -> complex:
        """Return ``<psi|A|psi>`` (imaginary part left for the caller to check)."""
        psi = np.asarray(psi)
        if self.storage is Storage.DIAGONAL:
            return complex(np.sum(self.data * np.abs(psi) ** 2))
        return complex(np.vdot(psi, self.apply(psi)))

    def max_abs_entry(self) -> float:
        if self.storage is Storage.SPARSE:
            return float(abs(self.data).max()) if self.data.nnz else 0.0
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0

    def hermiticity_defect(self) -> float:
        """``max|M_ab - conj(M_ba)|`` relative to ``max|M_ab|``."""
        if self.storage is Storage.DIAGONAL:
            return 0.0
        scale = self.max_abs_entry()
        if scale == 0.0:
            return 0.0
        if self.storage is Storage.DENSE:
            defect = float(np.max(np.abs(self.data - self.data.conj().T)))
        else:
            diff = self.data - self.data.conj().T
            defect = float(abs(diff).max()) if diff.nnz else 0.0
        return defect / scale

    def check_hermitian(self, tolerance: float = HERMITICITY_TOLERANCE) -> None:
        defect = self.hermiticity_defect()
        if defect > tolerance:
            raise ThermboundInputError(
                f"Operator is not Hermitian: relative defect {defect:.3e} > {tolerance:.1e}."
            )

    def spectral_norm(self) -> float:
        """Largest eigenvalue magnitude."""
        if self.storage is Storage.DIAGONAL:
            return float(np.max(np.abs(self.data))) if self.data.size else 0.0
        if self.storage is Storage.DENSE or self.dimension <= DENSE_NORM_LIMIT:
            return float(np.max(np.abs(np.linalg.eigvalsh(self.to_dense()))))
        values = eigsh(self.data, k=1, which="LM", return_eigenvectors=False)
        return float(np.max(np.abs(values)))

    def frobenius_norm(self) -> float:
        if self.storage is Storage.SPARSE:
            return float(sparse_norm(self.data))
        return float(np.linalg.norm(self.data))

    def trace(self) -> complex:
        if self.storage is Storage.DIAGONAL:
            return complex(np.sum(self.data))
        return complex(self.data.diagonal().sum())


def operator_distance(left: HermitianOperator, right: HermitianOperator) -> float:
    """Largest entry magnitude of ``left - right``."""
    if left.dimension != right.dimension:
        raise ThermboundInputError(
            f"Operator dimensions differ: {left.dimension} vs {right.dimension}."
        )
    diff = left.to_sparse() - right.to_sparse()
    return float(abs(diff).max()) if diff.nnz else 0.0


def commutator_norm(left: HermitianOperator, right: HermitianOperator) -> float:
    """Frobenius norm of ``[left, right]``."""
    a = left.to_sparse()
    b = right.to_sparse()
    comm = a @ b - b @ a
    return float(sparse_norm(comm)) if comm.nnz else 0.0


@dataclass(frozen=True, eq=False)
class SymmetryOperator:
    """A unitary operator stored as a sparse matrix."""

    matrix: sparse.csr_matrix

    @property
    def dimension(self) -> int:
        return int(self.matrix.shape[0])

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def conjugate(self, operator: HermitianOperator) -> HermitianOperator:
        """Return ``R A R^dagger``."""
        if operator.dimension != self.dimension:
            raise ThermboundInputError(
                f"Symmetry dimension {self.dimension} does not match operator {operator.dimension}."
            )
        r_dag = self.matrix.conj().T
        if operator.storage is Storage.DENSE:
            left = np.asarray(self.matrix @ operator.data)
            return HermitianOperator.dense(np.asarray(self.matrix @ left.conj().T).conj().T)
        return HermitianOperator(Storage.SPARSE, self.matrix @ operator.to_sparse() @ r_dag)

    def unitarity_defect(self) -> float:
        product = self.matrix.conj().T @ self.matrix - sparse.identity(self.dimension, format="csr")
        return float(abs(product).max()) if product.nnz else 0.0


def build_hamiltonian(spec: ChainSpec) -> HermitianOperator:
    """Assemble ``H = (J/2) sum (XX + YY) + g sum Y`` as a sparse entry list.

    The XX+YY bond term is a flip-flop: ``J (|01><10| + |10><01|)`` on each bond.
    """
    codes = basis_codes(spec.n_spins)
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    values: list[np.ndarray] = []

    for i, j in spec.bonds():
        differs = ((codes >> i) & 1) != ((codes >> j) & 1)
        source = codes[differs]
        rows.append(source ^ ((1 << i) | (1 << j)))
        cols.append(source)
        values.append(np.full(source.shape, spec.coupling, dtype=np.complex128))

    if spec.field != 0.0:
        for j in range(spec.n_spins):
            bit = (codes >> j) & 1
            # sigma^y |0> = i|1>, sigma^y |1> = -i|0>
            rows.append(codes ^ (1 << j))
            cols.append(codes)
            values.append(np.where(bit == 0, 1j, -1j) * spec.field)

    if not rows:
        return HermitianOperator.from_entries(
            spec.dimension, np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64), np.empty(0)
        )
    hamiltonian = HermitianOperator.from_entries(
        spec.dimension,
        np.concatenate(rows),
        np.concatenate(cols),
        np.concatenate(values),
    )
    hamiltonian.check_hermitian()
    return hamiltonian


def build_magnetization(n_spins: int) -> HermitianOperator:
    """Total ``sum_j sigma^z_j`` as a diagonal operator."""
    codes = basis_codes(n_spins)
    return HermitianOperator.diagonal((n_spins - 2 * popcount(codes, n_spins)).astype(np.float64))


def build_parity_y(n_spins: int) -> SymmetryOperator:
    """Global pi rotation about y, ``R = prod_j (i sigma^y_j)``.

    ``i sigma^y`` maps ``|0> -> -|1>`` and ``|1> -> |0>``, so R flips every bit
    with sign ``(-1)**(number of zero bits)``.
    """
    codes = basis_codes(n_spins)
    zeros = n_spins - popcount(codes, n_spins)
    signs = np.where(zeros % 2 == 0, 1.0, -1.0)
    flipped = codes ^ ((1 << n_spins) - 1)
    matrix = sparse.coo_matrix(
        (signs, (flipped, codes)), shape=(codes.size, codes.size)
    ).tocsr()
    return SymmetryOperator(matrix)
