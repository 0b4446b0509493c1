"""Hermitian eigendecomposition and spectral diagnostics."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Any

import numpy as np
import scipy.linalg

from .errors import ThermboundConvergenceError, ThermboundInputError
from .hilbert import HermitianOperator
from .logging_utils import LOGGER

DEFAULT_DEGENERACY_TOLERANCE = 1e-10
RESIDUAL_TOLERANCE = 1e-10
DEFAULT_GAP_MAX_DIMENSION = 256
DEFAULT_GAP_SAMPLES = 200_000


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Ascending eigenvalues and the unitary matrix whose column n is ``|E_n>``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual: float = 0.0

    def __post_init__(self) -> None:
        values = np.array(self.eigenvalues, dtype=np.float64)
        vectors = np.array(self.eigenvectors, dtype=np.complex128)
        if values.ndim != 1 or vectors.shape != (values.size, values.size):
            raise ThermboundInputError(
                f"Spectrum shapes disagree: {values.shape} eigenvalues, {vectors.shape} eigenvectors."
            )
        if values.size and np.any(np.diff(values) < 0.0):
            raise ThermboundInputError("Spectrum eigenvalues must be sorted ascending.")
        values.flags.writeable = False
        vectors.flags.writeable = False
        object.__setattr__(self, "eigenvalues", values)
        object.__setattr__(self, "eigenvectors", vectors)
        object.__setattr__(self, "residual", float(self.residual))

    @property
    def dimension(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def energy_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def energy_max(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def width(self) -> float:
        return self.energy_max - self.energy_min

    def normalized(self, energies: np.ndarray | float) -> np.ndarray:
        """Map energies onto ``[0, 1]`` by the spectrum extremes."""
        if self.width <= 0.0:
            raise ThermboundInputError("Spectrum has zero width; normalized energy is undefined.")
        return (np.asarray(energies, dtype=np.float64) - self.energy_min) / self.width

    def reconstruct(self) -> np.ndarray:
        """Return ``V diag(E) V^dagger``."""
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.conj().T

    def unitarity_defect(self) -> float:
        gram = self.eigenvectors.conj().T @ self.eigenvectors
        return float(np.max(np.abs(gram - np.eye(self.dimension))))


@dataclass(frozen=True)
class GapReport:
    """Degeneracy and degenerate-gap counts at a given tolerance."""

    degeneracy_count: int
    degenerate_gap_count: int
    tolerance: float
    pairs_examined: int
    exhaustive: bool
    distinct_levels: int
    mean_spacing_ratio: float

    def as_dict(self) -> dict[str, Any]:
        ratio = None if math.isnan(self.mean_spacing_ratio) else self.mean_spacing_ratio
        return {
            "degeneracy_count": self.degeneracy_count,
            "degenerate_gap_count": self.degenerate_gap_count,
            "tolerance": self.tolerance,
            "pairs_examined": self.pairs_examined,
            "exhaustive": self.exhaustive,
            "distinct_levels": self.distinct_levels,
            "mean_spacing_ratio": ratio,
        }


def degenerate_clusters(eigenvalues: np.ndarray, tolerance: float) -> list[np.ndarray]:
    """Group indices of sorted eigenvalues whose neighbours lie within ``tolerance``."""
    values = np.asarray(eigenvalues, dtype=np.float64)
    if values.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(values) > tolerance) + 1
    return np.split(np.arange(values.size), breaks)


def degeneracy_count(eigenvalues: np.ndarray, tolerance: float = DEFAULT_DEGENERACY_TOLERANCE) -> int:
    """Number of levels that coincide with a lower neighbour cluster."""
    values = np.asarray(eigenvalues)
    return int(values.size - len(degenerate_clusters(values, tolerance)))


def mean_spacing_ratio(levels: np.ndarray) -> float:
    """Mean of ``min(s_i, s_{i+1}) / max(s_i, s_{i+1})`` over consecutive spacings."""
    spacings = np.diff(np.asarray(levels, dtype=np.float64))
    if spacings.size < 2:
        return math.nan
    low = np.minimum(spacings[:-1], spacings[1:])
    high = np.maximum(spacings[:-1], spacings[1:])
    valid = high > 0.0
    if not np.any(valid):
        return math.nan
    return float(np.mean(low[valid] / high[valid]))


def diagonalize(
    hamiltonian: HermitianOperator,
    *,
    degeneracy_tolerance: float = DEFAULT_DEGENERACY_TOLERANCE,
) -> Spectrum:
    """Dense Hermitian eigendecomposition with a residual check."""
    hamiltonian.check_hermitian()
    dense = hamiltonian.to_dense()
    started = time.perf_counter()
    try:
        values, vectors = scipy.linalg.eigh(dense)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ThermboundConvergenceError(f"Eigensolver failed: {exc}") from exc

    scale = hamiltonian.max_abs_entry() or 1.0
    residual = float(np.max(np.abs(dense @ vectors - vectors * values))) / scale
    if not math.isfinite(residual) or residual > RESIDUAL_TOLERANCE:
        raise ThermboundConvergenceError(
            f"Eigensolver residual {residual:.3e} exceeds {RESIDUAL_TOLERANCE:.0e}.",
            residual=residual,
        )
    spectrum = Spectrum(values, vectors, residual)
    LOGGER.info(
        f"Diagonalized D={spectrum.dimension} in {time.perf_counter() - started:.2f}s "
        f"(residual {residual:.2e})"
    )
    degenerate = degeneracy_count(values, degeneracy_tolerance)
    if degenerate:
        LOGGER.warn(
            f"{degenerate} degenerate level(s) at tolerance {degeneracy_tolerance:.0e}; "
            "diagonal-ensemble formulas are applied to the computed eigenbasis."
        )
    return spectrum


def _count_close_pairs(sorted_gaps: np.ndarray, tolerance: float) -> int:
    upper = np.searchsorted(sorted_gaps, sorted_gaps + tolerance, side="right")
    return int(np.sum(upper - np.arange(sorted_gaps.size) - 1))


def _sample_gaps(rng: np.random.Generator, count: int, samples: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``samples`` level pairs as (upper, lower) index arrays. Equal indices are not filtered."""
    drawn = rng.integers(0, count, size=(samples, 2))
    return drawn.max(axis=1), drawn.min(axis=1)


def gap_diagnostics(
    spectrum: Spectrum,
    tol: float = DEFAULT_DEGENERACY_TOLERANCE,
    max_dimension: int = DEFAULT_GAP_MAX_DIMENSION,
    *,
    samples: int = DEFAULT_GAP_SAMPLES,
    seed: int = 0,
) -> GapReport:
    """Count degeneracies and coincident gaps ``E_k - E_l = E_m - E_n``.

    Levels within ``tol`` are merged into clusters first, so coincidences that
    only follow from degeneracies are not counted. Gap pairs are enumerated
    exhaustively up to ``max_dimension``; above it ``samples`` random pairs of
    positive gaps are drawn with ``seed``, so the coincidence rate estimates the
    exhaustive one.
    """
    if tol < 0.0:
        raise ThermboundInputError(f"Gap tolerance must be non-negative, got {tol}.")
    clusters = degenerate_clusters(spectrum.eigenvalues, tol)
    levels = np.array([spectrum.eigenvalues[idx].mean() for idx in clusters])
    degeneracies = spectrum.dimension - levels.size
    ratio = mean_spacing_ratio(levels)

    if spectrum.dimension <= max_dimension:
        first, second = np.triu_indices(levels.size, k=1)
        gaps = np.sort(levels[second] - levels[first])
        coincident = _count_close_pairs(gaps, tol) if gaps.size else 0
        return GapReport(
            degeneracy_count=degeneracies,
            degenerate_gap_count=coincident,
            tolerance=tol,
            pairs_examined=gaps.size * (gaps.size - 1) // 2,
            exhaustive=True,
            distinct_levels=int(levels.size),
            mean_spacing_ratio=ratio,
        )

    rng = np.random.default_rng(seed)
    count = levels.size
    k, l = _sample_gaps(rng, count, samples)
    m, n = _sample_gaps(rng, count, samples)
    valid = (k != l) & (m != n) & ~((k == m) & (l == n))
    difference = np.abs((levels[k] - levels[l]) - (levels[m] - levels[n]))
    coincident = int(np.sum(valid & (difference <= tol)))
    return GapReport(
        degeneracy_count=degeneracies,
        degenerate_gap_count=coincident,
        tolerance=tol,
        pairs_examined=int(np.sum(valid)),
        exhaustive=False,
        distinct_levels=int(count),
        mean_spacing_ratio=ratio,
    )
