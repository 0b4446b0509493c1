"""Parameter sweeps, d_eff growth with system size and exponent fits."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy import stats

from .dynamics import energy_basis_operator, exact_fluctuation
from .eigensolve import Spectrum
from .errors import ThermboundInputError
from .hilbert import ChainSpec, HermitianOperator, build_magnetization
from .logging_utils import LOGGER
from .parallel import parallel_map
from .spectrum_cache import load_or_diagonalize
from .states import product_amplitudes

DEFAULT_THETA_POINTS = 64
DEFAULT_PHI_POINTS = 64
DEFAULT_N_RANGE = tuple(range(6, 14))
FLUCTUATION_MAX_SPINS = 12

_SWEEP_STATE: dict[str, Any] = {}


@dataclass(frozen=True, eq=False)
class SweepResult:
    """Normalized energy and ``log10 d_eff`` over a ``theta x phi`` grid."""

    theta_grid: np.ndarray
    phi_grid: np.ndarray
    ne_map: np.ndarray
    log_deff_map: np.ndarray
    n_spins: int
    fluctuation_map: np.ndarray | None = None

    def rows(self) -> list[tuple[float, ...]]:
        rows: list[tuple[float, ...]] = []
        for i, theta in enumerate(self.theta_grid):
            for j, phi in enumerate(self.phi_grid):
                row = (float(theta), float(phi), float(self.ne_map[i, j]), float(self.log_deff_map[i, j]))
                if self.fluctuation_map is not None:
                    row += (float(self.fluctuation_map[i, j]),)
                rows.append(row)
        return rows


@dataclass(frozen=True, eq=False)
class ScalingFit:
    """Least-squares fit of ``ln d_eff = beta * N + intercept``.

    ``covariance`` is ordered (beta, intercept). ``r_squared`` is nan when
    ``ln d_eff`` does not vary.
    """

    beta: float
    intercept: float
    beta_stderr: float
    covariance: np.ndarray
    r_squared: float
    n_values: np.ndarray

    @property
    def r_squared_defined(self) -> bool:
        return not math.isnan(self.r_squared)


@dataclass(frozen=True, eq=False)
class DeffTable:
    """``d_eff`` per (phi, N) at fixed theta."""

    theta: float
    phi_grid: np.ndarray
    n_values: np.ndarray
    deff: np.ndarray

    def rows(self) -> list[tuple[float, int, float]]:
        return [
            (float(phi), int(n), float(self.deff[i, k]))
            for i, phi in enumerate(self.phi_grid)
            for k, n in enumerate(self.n_values)
        ]


@dataclass(frozen=True, eq=False)
class BetaCurve:
    table: DeffTable
    fits: tuple[ScalingFit, ...]

    def rows(self) -> list[tuple[float, float, float, float]]:
        return [
            (float(phi), fit.beta, fit.beta_stderr, fit.r_squared)
            for phi, fit in zip(self.table.phi_grid, self.fits)
        ]


@dataclass(frozen=True)
class ContrastPair:
    """A strongly (mid-spectrum) and a weakly (spectral edge) thermalizing phi."""

    strong_phi: float
    strong_ne: float
    weak_phi: float
    weak_ne: float


def angle_grid(points: int, stop: float, *, endpoint: bool) -> np.ndarray:
    if points < 1:
        raise ThermboundInputError(f"Grid needs at least one point, got {points}.")
    return np.linspace(0.0, stop, points, endpoint=endpoint)


def _diagonal_ensemble(spectrum: Spectrum, amplitudes: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Weights, d_eff and normalized energy for a block of state columns."""
    coefficients = spectrum.eigenvectors.conj().T @ amplitudes
    weights = np.abs(coefficients) ** 2
    d_eff = 1.0 / np.sum(weights**2, axis=0)
    mean_energy = spectrum.eigenvalues @ weights
    ne = np.clip((mean_energy - spectrum.energy_min) / spectrum.width, 0.0, 1.0)
    return weights, d_eff, ne


def _init_sweep(spectrum: Spectrum, phi_grid: np.ndarray, n_spins: int, a_energy: np.ndarray | None) -> None:
    _SWEEP_STATE.update(spectrum=spectrum, phi_grid=phi_grid, n_spins=n_spins, a_energy=a_energy)


def _sweep_row(theta: float) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    spectrum: Spectrum = _SWEEP_STATE["spectrum"]
    amplitudes = product_amplitudes(theta, _SWEEP_STATE["phi_grid"], _SWEEP_STATE["n_spins"])
    weights, d_eff, ne = _diagonal_ensemble(spectrum, amplitudes)
    a_energy = _SWEEP_STATE["a_energy"]
    fluctuations = None
    if a_energy is not None:
        fluctuations = np.array([exact_fluctuation(weights[:, k], a_energy) for k in range(weights.shape[1])])
    return ne, np.log10(d_eff), fluctuations


def sweep_grid(
    spec_template: ChainSpec,
    theta_grid: Sequence[float] | np.ndarray,
    phi_grid: Sequence[float] | np.ndarray,
    *,
    workers: int = 1,
    cache_dir: Path | None = None,
    spectrum: Spectrum | None = None,
    with_fluctuation: bool = False,
    observable: HermitianOperator | None = None,
) -> SweepResult:
    """NE and ``log10 d_eff`` for every product state on the grid.

    One diagonalization is shared by all points; each theta row is a work unit.
    ``with_fluctuation`` also records the exact infinite-time fluctuation of
    ``observable`` (total magnetization by default).
    """
    thetas = np.asarray(theta_grid, dtype=np.float64)
    phis = np.asarray(phi_grid, dtype=np.float64)
    if thetas.ndim != 1 or phis.ndim != 1 or thetas.size == 0 or phis.size == 0:
        raise ThermboundInputError("Sweep grids must be non-empty 1-D sequences.")
    if np.any(thetas < 0.0) or np.any(thetas > math.pi):
        raise ThermboundInputError("Sweep theta values must lie in [0, pi].")
    phis = np.mod(phis, 2.0 * math.pi)

    if spectrum is None:
        spectrum = load_or_diagonalize(spec_template, cache_dir)
    a_energy = None
    if with_fluctuation:
        if spec_template.n_spins > FLUCTUATION_MAX_SPINS:
            raise ThermboundInputError(
                f"Sweeps with fluctuations are limited to N <= {FLUCTUATION_MAX_SPINS}."
            )
        a_energy = np.array(energy_basis_operator(spectrum, observable or build_magnetization(spec_template.n_spins)))

    LOGGER.info(
        f"Sweeping {thetas.size}x{phis.size} grid at N={spec_template.n_spins} with {workers} worker(s)"
    )
    try:
        with LOGGER.timed("Sweep finished"):
            results = parallel_map(
                _sweep_row,
                [float(theta) for theta in thetas],
                workers,
                initializer=_init_sweep,
                initargs=(spectrum, phis, spec_template.n_spins, a_energy),
            )
    finally:
        _SWEEP_STATE.clear()

    return SweepResult(
        theta_grid=thetas,
        phi_grid=phis,
        ne_map=np.vstack([row[0] for row in results]),
        log_deff_map=np.vstack([row[1] for row in results]),
        n_spins=spec_template.n_spins,
        fluctuation_map=np.vstack([row[2] for row in results]) if with_fluctuation else None,
    )


def fit_exponent(n_values: Sequence[int] | np.ndarray, deff_values: Sequence[float] | np.ndarray) -> ScalingFit:
    """OLS of ``ln d_eff`` on ``N`` with covariance ``s^2 (X^T X)^-1``."""
    n = np.asarray(n_values, dtype=np.float64)
    deff = np.asarray(deff_values, dtype=np.float64)
    if n.ndim != 1 or n.shape != deff.shape:
        raise ThermboundInputError("n_values and deff_values must be equal-length vectors.")
    if n.size < 3:
        raise ThermboundInputError(f"Exponent fits need at least 3 points, got {n.size}.")
    if np.unique(n).size < 2:
        raise ThermboundInputError("Exponent fits need at least two distinct system sizes.")
    if np.any(~np.isfinite(deff)) or np.any(deff <= 0.0):
        raise ThermboundInputError("d_eff values must be finite and positive.")

    log_deff = np.log(deff)
    line = stats.linregress(n, log_deff)
    beta, intercept = float(line.slope), float(line.intercept)
    residuals = log_deff - (beta * n + intercept)
    ss_res = float(np.sum(residuals**2))
    ss_tot = float(np.sum((log_deff - log_deff.mean()) ** 2))
    design = np.column_stack([n, np.ones_like(n)])
    covariance = (ss_res / (n.size - 2)) * np.linalg.inv(design.T @ design)
    covariance.flags.writeable = False
    n.flags.writeable = False
    return ScalingFit(
        beta=beta,
        intercept=intercept,
        beta_stderr=math.sqrt(max(float(covariance[0, 0]), 0.0)),
        covariance=covariance,
        r_squared=1.0 - ss_res / ss_tot if ss_tot > 0.0 else math.nan,
        n_values=n.astype(np.int64),
    )


def _deff_column(task: tuple[ChainSpec, float, np.ndarray, Path | None]) -> np.ndarray:
    spec, theta, phis, cache_dir = task
    spectrum = load_or_diagonalize(spec, cache_dir)
    _, d_eff, _ = _diagonal_ensemble(spectrum, product_amplitudes(theta, phis, spec.n_spins))
    return d_eff


def deff_by_size(
    spec_template: ChainSpec,
    theta: float,
    phi_grid: Sequence[float] | np.ndarray,
    n_range: Sequence[int] = DEFAULT_N_RANGE,
    *,
    workers: int = 1,
    cache_dir: Path | None = None,
) -> DeffTable:
    """``d_eff`` for each phi at each system size, one diagonalization per size."""
    if not 0.0 <= theta <= math.pi:
        raise ThermboundInputError(f"theta must lie in [0, pi], got {theta}.")
    phis = np.mod(np.asarray(phi_grid, dtype=np.float64), 2.0 * math.pi)
    sizes = np.asarray(sorted(set(int(n) for n in n_range)), dtype=np.int64)
    if phis.ndim != 1 or phis.size == 0 or sizes.size == 0:
        raise ThermboundInputError("phi grid and n_range must be non-empty.")
    tasks = [(spec_template.with_size(int(n)), float(theta), phis, cache_dir) for n in sizes]
    LOGGER.info(f"Computing d_eff for {phis.size} phi value(s) over N={sizes.tolist()}")
    with LOGGER.timed("Size scan finished"):
        columns = parallel_map(_deff_column, tasks, workers)
    return DeffTable(theta=float(theta), phi_grid=phis, n_values=sizes, deff=np.column_stack(columns))


def synthetic_deff_table(
    phi_grid: Sequence[float] | np.ndarray,
    n_range: Sequence[int],
    beta: float,
) -> DeffTable:
    """A table with ``d_eff = exp(beta * N)`` for every phi, bypassing physics."""
    phis = np.asarray(phi_grid, dtype=np.float64)
    sizes = np.asarray(sorted(set(int(n) for n in n_range)), dtype=np.int64)
    deff = np.tile(np.exp(beta * sizes.astype(np.float64)), (phis.size, 1))
    return DeffTable(theta=math.nan, phi_grid=phis, n_values=sizes, deff=deff)


def fit_table(table: DeffTable) -> BetaCurve:
    fits = tuple(fit_exponent(table.n_values, table.deff[i]) for i in range(table.phi_grid.size))
    return BetaCurve(table=table, fits=fits)


def beta_curve(
    spec_template: ChainSpec,
    theta: float,
    phi_grid: Sequence[float] | np.ndarray,
    n_range: Sequence[int] = DEFAULT_N_RANGE,
    *,
    workers: int = 1,
    cache_dir: Path | None = None,
) -> BetaCurve:
    """One exponent fit per phi, ordered by phi as given."""
    return fit_table(
        deff_by_size(spec_template, theta, phi_grid, n_range, workers=workers, cache_dir=cache_dir)
    )


def pick_contrast_states(phi_grid: Sequence[float] | np.ndarray, ne_values: Sequence[float] | np.ndarray) -> ContrastPair:
    """Choose the phi with NE closest to 1/2 and the phi with NE furthest from it."""
    phis = np.asarray(phi_grid, dtype=np.float64)
    ne = np.asarray(ne_values, dtype=np.float64)
    if phis.ndim != 1 or phis.shape != ne.shape or phis.size == 0:
        raise ThermboundInputError("phi grid and NE values must be equal-length non-empty vectors.")
    distance = np.abs(ne - 0.5)
    strong = int(np.argmin(distance))
    weak = int(np.argmax(distance))
    return ContrastPair(float(phis[strong]), float(ne[strong]), float(phis[weak]), float(ne[weak]))


def rank_correlation(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray) -> float:
    """Spearman rank correlation of two equal-length samples."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape or a.size < 2:
        raise ThermboundInputError("Rank correlation needs two equal-length samples of size >= 2.")
    rho, _ = stats.spearmanr(a, b)
    return float(rho)
