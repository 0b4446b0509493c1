"""Time evolution, time averages and infinite-time fluctuations."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Any

import numpy as np
from scipy.integrate import trapezoid

from .eigensolve import Spectrum
from .errors import ThermboundCapabilityError, ThermboundInputError, ThermboundNumericsError
from .hilbert import HermitianOperator
from .logging_utils import LOGGER
from .states import validated_weights

DEFAULT_TIME_START = 0.0
DEFAULT_TIME_STOP = 40.0
DEFAULT_TIME_STEP = 0.05
IMAGINARY_TOLERANCE = 1e-10
ENERGY_BASIS_LIMIT = 4096
TIME_CHUNK = 256
TIME_GRID_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class TimeTrace:
    """Sampled real expectation values ``<A(t)>``."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        times = np.array(self.times, dtype=np.float64)
        values = np.array(self.values, dtype=np.float64)
        if times.ndim != 1 or values.shape != times.shape:
            raise ThermboundInputError(
                f"Trace times {times.shape} and values {values.shape} must be equal-length vectors."
            )
        if not np.all(np.isfinite(times)):
            raise ThermboundInputError("Trace times must be finite.")
        if times.size > 1 and np.any(np.diff(times) <= 0.0):
            raise ThermboundInputError("Trace times must be strictly increasing.")
        times.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.times.size)

    def rows(self) -> list[tuple[float, float]]:
        return [(float(t), float(v)) for t, v in zip(self.times, self.values)]


@dataclass(frozen=True)
class FluctuationReport:
    """Infinite-time fluctuation of an observable next to its ``1/d_eff`` bounds.

    ``bound`` is ``||A||**2 / d_eff``; ``literal_bound`` is ``||A|| / d_eff``.
    """

    exact_variance: float | None
    bound: float
    literal_bound: float
    d_eff: float
    operator_norm: float
    per_spin_variance: float | None = None

    @property
    def satisfied(self) -> bool | None:
        if self.exact_variance is None:
            return None
        return self.exact_variance <= self.bound

    def as_dict(self) -> dict[str, Any]:
        return {
            "exact_variance": self.exact_variance,
            "bound": self.bound,
            "literal_bound": self.literal_bound,
            "d_eff": self.d_eff,
            "operator_norm": self.operator_norm,
            "satisfied": self.satisfied,
            "per_spin_variance": self.per_spin_variance,
        }


def time_grid(start: float, stop: float, step: float) -> np.ndarray:
    """Samples ``start + k * step`` up to ``stop``, which is included when it lies on the grid."""
    if not np.all(np.isfinite([start, stop, step])):
        raise ThermboundInputError("Time grid bounds must be finite.")
    if step <= 0.0 or stop <= start:
        raise ThermboundInputError(
            f"Time grid needs step > 0 and stop > start, got start={start}, stop={stop}, step={step}."
        )
    count = int(np.floor((stop - start) / step + TIME_GRID_SLACK)) + 1
    return start + step * np.arange(count, dtype=np.float64)


def _check_times(times: np.ndarray) -> np.ndarray:
    times = np.atleast_1d(np.asarray(times, dtype=np.float64))
    if times.ndim != 1:
        raise ThermboundInputError("Times must be a 1-D array.")
    if not np.all(np.isfinite(times)):
        raise ThermboundInputError("Times must be finite.")
    return times


def _check_coefficients(coefficients: np.ndarray, spectrum: Spectrum) -> np.ndarray:
    coefficients = np.asarray(coefficients, dtype=np.complex128)
    if coefficients.shape != (spectrum.dimension,):
        raise ThermboundInputError(
            f"Coefficient vector of shape {coefficients.shape} does not match dimension {spectrum.dimension}."
        )
    return coefficients


def evolve_state(coefficients: np.ndarray, spectrum: Spectrum, times: np.ndarray) -> np.ndarray:
    """Return ``psi(t)`` in the computational basis, one column per time."""
    coefficients = _check_coefficients(coefficients, spectrum)
    times = _check_times(times)
    phases = np.exp(-1j * np.outer(spectrum.eigenvalues, times))
    return spectrum.eigenvectors @ (coefficients[:, None] * phases)


def evolve_expectation(
    coefficients: np.ndarray,
    spectrum: Spectrum,
    observable: HermitianOperator,
    times: np.ndarray,
) -> TimeTrace:
    """Evaluate ``<psi(t)|A|psi(t)>`` on a time grid.

    Energy-basis amplitudes ``c_n exp(-i E_n t)`` are rotated into the
    computational basis and the observable is applied in its own storage.
    """
    coefficients = _check_coefficients(coefficients, spectrum)
    times = _check_times(times)
    if observable.dimension != spectrum.dimension:
        raise ThermboundInputError(
            f"Observable dimension {observable.dimension} does not match spectrum {spectrum.dimension}."
        )
    limit = IMAGINARY_TOLERANCE * observable.spectral_norm()
    values = np.empty(times.size, dtype=np.float64)
    for start in range(0, times.size, TIME_CHUNK):
        window = times[start : start + TIME_CHUNK]
        states = evolve_state(coefficients, spectrum, window)
        expectations = np.sum(states.conj() * observable.apply(states), axis=0)
        residue = float(np.max(np.abs(expectations.imag))) if expectations.size else 0.0
        if residue > limit:
            raise ThermboundNumericsError(
                f"Expectation has imaginary residue {residue:.3e} above {limit:.3e}."
            )
        values[start : start + window.size] = expectations.real
    return TimeTrace(times, values)


def time_average(trace: TimeTrace) -> float:
    """Trapezoidal mean over the sampled window, a finite-T estimate of the long-time average."""
    if len(trace) < 2:
        raise ThermboundInputError("Time averages need at least two samples.")
    span = float(trace.times[-1] - trace.times[0])
    return float(trapezoid(trace.values, trace.times) / span)


def time_variance(trace: TimeTrace) -> float:
    """Trapezoidal mean of ``(<A(t)> - mean)**2`` over the sampled window."""
    mean = time_average(trace)
    span = float(trace.times[-1] - trace.times[0])
    return float(trapezoid((trace.values - mean) ** 2, trace.times) / span)


@lru_cache(maxsize=2)
def energy_basis_operator(spectrum: Spectrum, observable: HermitianOperator) -> np.ndarray:
    """Return ``V^dagger A V``, cached per (spectrum, observable) pair.

    The cache holds up to two D x D matrices; release them with
    ``clear_energy_basis_cache``.
    """
    if spectrum.dimension > ENERGY_BASIS_LIMIT:
        raise ThermboundCapabilityError(
            f"Energy-basis observable needs dimension <= {ENERGY_BASIS_LIMIT}, got {spectrum.dimension}."
        )
    if observable.dimension != spectrum.dimension:
        raise ThermboundInputError(
            f"Observable dimension {observable.dimension} does not match spectrum {spectrum.dimension}."
        )
    vectors = spectrum.eigenvectors
    matrix = vectors.conj().T @ observable.apply(vectors)
    matrix.flags.writeable = False
    return matrix


def clear_energy_basis_cache() -> None:
    energy_basis_operator.cache_clear()


def exact_fluctuation(weights: np.ndarray, a_energy: np.ndarray) -> float:
    """``sum_{n != m} w_n w_m |A_nm|**2``, the infinite-time fluctuation without degenerate gaps."""
    a_energy = np.asarray(a_energy)
    if a_energy.ndim != 2 or a_energy.shape[0] != a_energy.shape[1]:
        raise ThermboundInputError("Energy-basis observable must be a square matrix.")
    if a_energy.shape[0] > ENERGY_BASIS_LIMIT:
        raise ThermboundCapabilityError(
            f"Exact fluctuation needs dimension <= {ENERGY_BASIS_LIMIT}, got {a_energy.shape[0]}."
        )
    weights = validated_weights(weights)
    if weights.size != a_energy.shape[0]:
        raise ThermboundInputError(
            f"Weights length {weights.size} does not match observable dimension {a_energy.shape[0]}."
        )
    magnitudes = np.abs(a_energy) ** 2
    total = float(weights @ magnitudes @ weights)
    diagonal = float(np.sum(weights**2 * np.diag(magnitudes)))
    return max(total - diagonal, 0.0)


def fluctuation_bound(
    observable: HermitianOperator,
    d_eff: float,
    exact_variance: float | None = None,
    n_spins: int | None = None,
) -> FluctuationReport:
    """Bound the infinite-time fluctuation by ``||A||**2 / d_eff``."""
    if not d_eff >= 1.0 - 1e-12:
        raise ThermboundInputError(f"d_eff must be at least 1, got {d_eff}.")
    norm = observable.spectral_norm()
    report = FluctuationReport(
        exact_variance=exact_variance,
        bound=norm**2 / d_eff,
        literal_bound=norm / d_eff,
        d_eff=float(d_eff),
        operator_norm=norm,
        per_spin_variance=(
            exact_variance / n_spins**2 if exact_variance is not None and n_spins else None
        ),
    )
    if exact_variance is not None:
        LOGGER.info(
            f"Fluctuation {exact_variance:.3e} vs bound {report.bound:.3e} "
            f"(d_eff={d_eff:.1f}, ||A||={norm:.3g})"
        )
        if not report.satisfied:
            LOGGER.warn("Exact fluctuation exceeds the ||A||^2/d_eff bound.")
    return report
