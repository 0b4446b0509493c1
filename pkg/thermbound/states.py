"""Product initial states and diagonal-ensemble quantities."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .eigensolve import Spectrum
from .errors import ThermboundInputError
from .hilbert import HermitianOperator, basis_codes, popcount

NORM_TOLERANCE = 1e-12
WEIGHT_SUM_TOLERANCE = 1e-10
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ProductStateParams:
    """Bloch angles shared by every site of a product state."""

    theta: float
    phi: float
    n_spins: int

    def __post_init__(self) -> None:
        if isinstance(self.n_spins, bool) or int(self.n_spins) != self.n_spins or self.n_spins < 1:
            raise ThermboundInputError(f"n_spins must be a positive integer, got {self.n_spins!r}.")
        theta = float(self.theta)
        phi = float(self.phi)
        if not (math.isfinite(theta) and math.isfinite(phi)):
            raise ThermboundInputError(f"Angles must be finite, got theta={theta}, phi={phi}.")
        if not 0.0 <= theta <= math.pi:
            raise ThermboundInputError(f"theta must lie in [0, pi], got {theta}.")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi % TWO_PI)
        object.__setattr__(self, "n_spins", int(self.n_spins))


@dataclass(frozen=True, eq=False)
class StateVector:
    """Unit-norm amplitudes in the computational basis."""

    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amplitudes = np.array(self.amplitudes, dtype=np.complex128)
        if amplitudes.ndim != 1:
            raise ThermboundInputError("State amplitudes must be a 1-D array.")
        norm = float(np.linalg.norm(amplitudes))
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise ThermboundInputError(f"State is not normalized: norm {norm!r}.")
        amplitudes.flags.writeable = False
        object.__setattr__(self, "amplitudes", amplitudes)

    @property
    def dimension(self) -> int:
        return int(self.amplitudes.size)


@dataclass(frozen=True, eq=False)
class OverlapProfile:
    """Energy-basis expansion of an initial state and its diagonal ensemble."""

    coefficients: np.ndarray
    weights: np.ndarray
    d_eff: float
    mean_energy: float
    energy_variance: float
    normalized_energy: float


def product_amplitudes(theta: float, phis: np.ndarray | float, n_spins: int) -> np.ndarray:
    """Amplitudes of product states sharing ``theta``; one column per ``phi``.

    Each site carries ``cos(theta/2)|Z+> + exp(-i phi) sin(theta/2)|Z->``, so the
    amplitude of a code depends only on its number of flipped bits.
    """
    flipped = popcount(basis_codes(n_spins), n_spins)
    up = math.cos(theta / 2.0)
    down = np.exp(-1j * np.atleast_1d(np.asarray(phis, dtype=np.float64))) * math.sin(theta / 2.0)
    amplitudes = (up ** (n_spins - flipped))[:, None] * down[None, :] ** flipped[:, None]
    if np.ndim(phis) == 0:
        return amplitudes[:, 0]
    return amplitudes


def product_state(params: ProductStateParams) -> StateVector:
    """The product state of Bloch angles ``(theta, phi)`` on every site."""
    return StateVector(product_amplitudes(params.theta, params.phi, params.n_spins))


def eigenstate_vector(spectrum: Spectrum, index: int) -> StateVector:
    """Column ``index`` of the eigenvector matrix as a state."""
    if not 0 <= index < spectrum.dimension:
        raise ThermboundInputError(
            f"Eigenstate index {index} out of range for dimension {spectrum.dimension}."
        )
    return StateVector(spectrum.eigenvectors[:, index])


def overlap_coefficients(psi: StateVector, spectrum: Spectrum) -> np.ndarray:
    """Return ``c_n = <E_n|psi>``."""
    if psi.dimension != spectrum.dimension:
        raise ThermboundInputError(
            f"State dimension {psi.dimension} does not match spectrum {spectrum.dimension}."
        )
    coefficients = spectrum.eigenvectors.conj().T @ psi.amplitudes
    total = float(np.sum(np.abs(coefficients) ** 2))
    if abs(total - 1.0) > WEIGHT_SUM_TOLERANCE:
        raise ThermboundInputError(f"Overlap weights sum to {total!r}, expected 1.")
    return coefficients


def validated_weights(weights: np.ndarray) -> np.ndarray:
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 1 or weights.size == 0:
        raise ThermboundInputError("Weights must be a non-empty 1-D array.")
    if np.any(weights < 0.0) or not np.all(np.isfinite(weights)):
        raise ThermboundInputError("Weights must be finite and non-negative.")
    total = float(np.sum(weights))
    if abs(total - 1.0) > WEIGHT_SUM_TOLERANCE:
        raise ThermboundInputError(f"Weights sum to {total!r}, expected 1.")
    return weights


def effective_dimension(weights: np.ndarray) -> float:
    """``1 / sum w_n**2``, equal to ``1 / Tr(rho_bar**2)``."""
    weights = validated_weights(weights)
    return float(1.0 / np.sum(weights**2))


def normalized_energy(psi: StateVector, hamiltonian: HermitianOperator, spectrum: Spectrum) -> float:
    """``(<psi|H|psi> - E_min) / (E_max - E_min)``."""
    if hamiltonian.dimension != psi.dimension:
        raise ThermboundInputError(
            f"Hamiltonian dimension {hamiltonian.dimension} does not match state {psi.dimension}."
        )
    energy = hamiltonian.expectation(psi.amplitudes).real
    return float(np.clip(spectrum.normalized(energy), 0.0, 1.0))


def diagonal_average(weights: np.ndarray, a_diag_energy: np.ndarray) -> float:
    """Diagonal-ensemble average ``sum_n w_n <E_n|A|E_n>``."""
    weights = np.asarray(weights, dtype=np.float64)
    a_diag_energy = np.asarray(a_diag_energy, dtype=np.float64)
    if weights.shape != a_diag_energy.shape:
        raise ThermboundInputError(
            f"Weights length {weights.size} does not match observable diagonal {a_diag_energy.size}."
        )
    return float(np.dot(weights, a_diag_energy))


def overlap_profile(psi: StateVector, spectrum: Spectrum) -> OverlapProfile:
    """Expand ``psi`` in the energy basis and derive its diagonal-ensemble figures."""
    coefficients = overlap_coefficients(psi, spectrum)
    weights = np.abs(coefficients) ** 2
    energies = spectrum.eigenvalues
    mean_energy = float(np.dot(weights, energies))
    variance = max(float(np.dot(weights, energies**2)) - mean_energy**2, 0.0)
    coefficients.flags.writeable = False
    weights.flags.writeable = False
    return OverlapProfile(
        coefficients=coefficients,
        weights=weights,
        d_eff=effective_dimension(weights),
        mean_energy=mean_energy,
        energy_variance=variance,
        normalized_energy=float(np.clip(spectrum.normalized(mean_energy), 0.0, 1.0)),
    )
