"""Eigenstate thermalization diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .dynamics import ENERGY_BASIS_LIMIT, energy_basis_operator
from .eigensolve import DEFAULT_DEGENERACY_TOLERANCE, Spectrum, degenerate_clusters
from .errors import ThermboundCapabilityError, ThermboundInputError, ThermboundSymmetryError
from .hilbert import HermitianOperator, SymmetryOperator, operator_distance
from .logging_utils import LOGGER

SHELL_WIDTH_FRACTION = 0.05
DEFAULT_BIN_WIDTH = 0.1
DEFAULT_NULL_TOLERANCE = 1e-8
DEFAULT_WINDOW_COUNT = 20
COLUMN_BLOCK = 512


@dataclass(frozen=True, eq=False)
class EigenExpectations:
    """``<E_n|A|E_n>`` for every eigenstate, with its normalized energy."""

    energies: np.ndarray
    diag_values: np.ndarray
    normalized_energies: np.ndarray

    def __post_init__(self) -> None:
        sizes = {np.shape(self.energies), np.shape(self.diag_values), np.shape(self.normalized_energies)}
        if len(sizes) != 1:
            raise ThermboundInputError("Eigen-expectation vectors must have equal lengths.")

    def rows(self) -> list[tuple[float, float, float]]:
        return [
            (float(e), float(ne), float(a))
            for e, ne, a in zip(self.energies, self.normalized_energies, self.diag_values)
        ]


@dataclass(frozen=True)
class MicrocanonicalShell:
    center_energy: float
    half_width: float
    member_count: int

    def __post_init__(self) -> None:
        if not self.half_width > 0.0:
            raise ThermboundInputError(f"Shell half-width must be positive, got {self.half_width}.")

    def contains(self, energies: np.ndarray) -> np.ndarray:
        return np.abs(np.asarray(energies) - self.center_energy) <= self.half_width

    def as_dict(self) -> dict[str, Any]:
        return {
            "center_energy": self.center_energy,
            "half_width": self.half_width,
            "member_count": self.member_count,
        }


@dataclass(frozen=True, eq=False)
class OffDiagProfile:
    """Binned mean of ``|A_nm|**2`` against the gap ``|E_n - E_m|``.

    ``omega_bins`` holds bin centres; only bins with members are kept.
    """

    omega_bins: np.ndarray
    mean_sq_magnitude: np.ndarray
    counts: np.ndarray
    bin_width: float
    energy_window: tuple[float, float]

    def rows(self) -> list[tuple[float, float, int]]:
        return [
            (float(w), float(m), int(c))
            for w, m, c in zip(self.omega_bins, self.mean_sq_magnitude, self.counts)
        ]


@dataclass(frozen=True)
class NullityReport:
    """Which eigenstates a symmetry forces to have ``A_nn = 0``."""

    tolerance: float
    hamiltonian_defect: float
    observable_defect: float
    degenerate_indices: tuple[int, ...]
    certified_count: int
    max_abs_certified: float
    failures: tuple[int, ...] = field(default_factory=tuple)

    @property
    def certified(self) -> bool:
        return not self.failures

    def as_dict(self) -> dict[str, Any]:
        return {
            "tolerance": self.tolerance,
            "hamiltonian_defect": self.hamiltonian_defect,
            "observable_defect": self.observable_defect,
            "degenerate_count": len(self.degenerate_indices),
            "certified_count": self.certified_count,
            "max_abs_certified": self.max_abs_certified,
            "failures": list(self.failures),
            "certified": self.certified,
        }


@dataclass(frozen=True, eq=False)
class WindowVariance:
    """Spread of ``A_nn`` inside consecutive energy windows."""

    window_centers: np.ndarray
    variances: np.ndarray
    counts: np.ndarray


def eigenstate_expectations(spectrum: Spectrum, observable: HermitianOperator) -> EigenExpectations:
    """Compute ``A_nn`` for every eigenvector column."""
    if observable.dimension != spectrum.dimension:
        raise ThermboundInputError(
            f"Observable dimension {observable.dimension} does not match spectrum {spectrum.dimension}."
        )
    vectors = spectrum.eigenvectors
    diag = np.empty(spectrum.dimension, dtype=np.float64)
    for start in range(0, spectrum.dimension, COLUMN_BLOCK):
        block = vectors[:, start : start + COLUMN_BLOCK]
        diag[start : start + block.shape[1]] = np.sum(block.conj() * observable.apply(block), axis=0).real
    energies = np.array(spectrum.eigenvalues)
    return EigenExpectations(
        energies=energies,
        diag_values=diag,
        normalized_energies=np.clip(spectrum.normalized(energies), 0.0, 1.0),
    )


def microcanonical_shell(
    energies: np.ndarray,
    center: float,
    half_width: float | None = None,
) -> MicrocanonicalShell:
    """Shell ``[center - half_width, center + half_width]`` and its member count.

    ``half_width`` defaults to 5% of the spectral width.
    """
    energies = np.asarray(energies, dtype=np.float64)
    if energies.size == 0:
        raise ThermboundInputError("Cannot build a shell over an empty spectrum.")
    if half_width is None:
        half_width = SHELL_WIDTH_FRACTION * float(energies.max() - energies.min())
    members = int(np.count_nonzero(np.abs(energies - center) <= half_width))
    return MicrocanonicalShell(float(center), float(half_width), members)


def microcanonical_average(expect: EigenExpectations, shell: MicrocanonicalShell) -> float:
    """Unweighted mean of ``A_nn`` over the shell, ``Tr(rho_micro A)``."""
    inside = shell.contains(expect.energies)
    if not np.any(inside):
        raise ThermboundInputError(
            f"Microcanonical shell {shell.center_energy} +/- {shell.half_width} holds no eigenstates."
        )
    return float(np.mean(expect.diag_values[inside]))


def offdiagonal_stats(
    spectrum: Spectrum,
    observable: HermitianOperator,
    energy_window: tuple[float, float] | None = None,
    bin_width: float = DEFAULT_BIN_WIDTH,
    *,
    block_rows: int = 256,
) -> OffDiagProfile:
    """Bin ``|A_nm|**2`` (n < m) by ``|E_n - E_m|`` for pairs whose mean energy is in the window.

    The window defaults to the central half of the spectrum.
    """
    if spectrum.dimension > ENERGY_BASIS_LIMIT:
        raise ThermboundCapabilityError(
            f"Off-diagonal statistics need dimension <= {ENERGY_BASIS_LIMIT}, got {spectrum.dimension}."
        )
    if not bin_width > 0.0:
        raise ThermboundInputError(f"bin_width must be positive, got {bin_width}.")
    if energy_window is None:
        quarter = spectrum.width / 4.0
        energy_window = (spectrum.energy_min + quarter, spectrum.energy_max - quarter)
    low, high = (float(v) for v in energy_window)
    if not (spectrum.energy_min <= low < high <= spectrum.energy_max):
        raise ThermboundInputError(
            f"Energy window ({low}, {high}) must be increasing and inside "
            f"[{spectrum.energy_min}, {spectrum.energy_max}]."
        )

    magnitudes = np.abs(energy_basis_operator(spectrum, observable)) ** 2
    energies = spectrum.eigenvalues
    n_bins = int(np.floor(spectrum.width / bin_width)) + 2
    sums = np.zeros(n_bins, dtype=np.float64)
    counts = np.zeros(n_bins, dtype=np.int64)
    columns = np.arange(spectrum.dimension)
    for start in range(0, spectrum.dimension, block_rows):
        rows = np.arange(start, min(start + block_rows, spectrum.dimension))
        mean_energy = (energies[rows, None] + energies[None, :]) / 2.0
        keep = (columns[None, :] > rows[:, None]) & (mean_energy >= low) & (mean_energy <= high)
        omega = np.abs(energies[None, :] - energies[rows, None])[keep]
        index = np.minimum((omega / bin_width).astype(np.int64), n_bins - 1)
        sums += np.bincount(index, weights=magnitudes[rows][keep], minlength=n_bins)
        counts += np.bincount(index, minlength=n_bins)

    occupied = counts > 0
    LOGGER.debug(f"Off-diagonal profile: {int(counts.sum())} pairs in {int(occupied.sum())} bins")
    return OffDiagProfile(
        omega_bins=(np.flatnonzero(occupied) + 0.5) * bin_width,
        mean_sq_magnitude=sums[occupied] / counts[occupied],
        counts=counts[occupied],
        bin_width=float(bin_width),
        energy_window=(low, high),
    )


def _negated(operator: HermitianOperator) -> HermitianOperator:
    return HermitianOperator(operator.storage, -operator.data)


def certify_nullity(
    spectrum: Spectrum,
    symmetry: SymmetryOperator,
    observable: HermitianOperator,
    tol: float = DEFAULT_NULL_TOLERANCE,
    *,
    hamiltonian: HermitianOperator | None = None,
    degeneracy_tolerance: float = DEFAULT_DEGENERACY_TOLERANCE,
) -> NullityReport:
    """Certify ``|A_nn| <= tol`` on non-degenerate levels when ``R H R^dagger = H`` and ``R A R^dagger = -A``.

    Without ``hamiltonian`` the operator is rebuilt from the spectrum.
    """
    if hamiltonian is None:
        hamiltonian = HermitianOperator.dense(spectrum.reconstruct())
    h_defect = operator_distance(symmetry.conjugate(hamiltonian), hamiltonian)
    a_defect = operator_distance(symmetry.conjugate(observable), _negated(observable))
    if h_defect > tol or a_defect > tol:
        raise ThermboundSymmetryError(
            f"Symmetry precondition fails: |RHR^+ - H| = {h_defect:.3e}, "
            f"|RAR^+ + A| = {a_defect:.3e} (tolerance {tol:.1e}).",
            hamiltonian_defect=h_defect,
            observable_defect=a_defect,
        )

    expect = eigenstate_expectations(spectrum, observable)
    clusters = degenerate_clusters(spectrum.eigenvalues, degeneracy_tolerance)
    single = np.array([idx[0] for idx in clusters if idx.size == 1], dtype=np.int64)
    degenerate = tuple(int(i) for idx in clusters if idx.size > 1 for i in idx)
    values = np.abs(expect.diag_values[single])
    failures = tuple(int(i) for i in single[values > tol])
    report = NullityReport(
        tolerance=tol,
        hamiltonian_defect=h_defect,
        observable_defect=a_defect,
        degenerate_indices=degenerate,
        certified_count=int(single.size - len(failures)),
        max_abs_certified=float(values.max()) if values.size else 0.0,
        failures=failures,
    )
    LOGGER.info(
        f"Nullity: {report.certified_count} certified, {len(degenerate)} degenerate, "
        f"{len(failures)} failure(s); max |A_nn| = {report.max_abs_certified:.2e}"
    )
    return report


def diagonal_window_variance(
    expect: EigenExpectations,
    window_count: int = DEFAULT_WINDOW_COUNT,
) -> WindowVariance:
    """Variance of ``A_nn`` in equal-width energy windows; empty windows are dropped."""
    if window_count < 1:
        raise ThermboundInputError(f"window_count must be positive, got {window_count}.")
    energies = np.asarray(expect.energies)
    edges = np.linspace(energies.min(), energies.max(), window_count + 1)
    index = np.clip(np.searchsorted(edges, energies, side="right") - 1, 0, window_count - 1)
    centers: list[float] = []
    variances: list[float] = []
    counts: list[int] = []
    for window in range(window_count):
        members = expect.diag_values[index == window]
        if members.size == 0:
            continue
        centers.append(float((edges[window] + edges[window + 1]) / 2.0))
        variances.append(float(np.var(members)))
        counts.append(int(members.size))
    return WindowVariance(np.array(centers), np.array(variances), np.array(counts, dtype=np.int64))
