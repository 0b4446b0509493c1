from __future__ import annotations

import io
import math
import unittest
from contextlib import redirect_stderr

import numpy as np
import scipy.linalg

from thermbound.dynamics import (
    TimeTrace,
    clear_energy_basis_cache,
    energy_basis_operator,
    evolve_expectation,
    evolve_state,
    exact_fluctuation,
    fluctuation_bound,
    time_average,
    time_grid,
    time_variance,
)
from thermbound.eigensolve import Spectrum, diagonalize
from thermbound.errors import ThermboundCapabilityError, ThermboundInputError
from thermbound.hilbert import ChainSpec, HermitianOperator, build_hamiltonian, build_magnetization
from thermbound.states import ProductStateParams, diagonal_average, overlap_profile, product_state


def random_unitary(dimension: int, rng: np.random.Generator) -> np.ndarray:
    raw = rng.normal(size=(dimension, dimension)) + 1j * rng.normal(size=(dimension, dimension))
    q, r = np.linalg.qr(raw)
    return q * (np.diag(r) / np.abs(np.diag(r)))


class EvolveTests(unittest.TestCase):
    def setUp(self) -> None:
        self.spec = ChainSpec(4)
        self.hamiltonian = build_hamiltonian(self.spec)
        self.spectrum = diagonalize(self.hamiltonian)
        self.mz = build_magnetization(4)

    def test_matches_matrix_exponential(self) -> None:
        dense = self.hamiltonian.to_dense()
        mz = self.mz.to_dense()
        for theta, phi in ((math.pi / 2, 0.5), (0.3, 2.0), (2.5, 4.4)):
            psi = product_state(ProductStateParams(theta, phi, 4))
            profile = overlap_profile(psi, self.spectrum)
            times = np.linspace(0.0, 10.0, 50)
            trace = evolve_expectation(profile.coefficients, self.spectrum, self.mz, times)
            for t, value in zip(times, trace.values):
                state = scipy.linalg.expm(-1j * t * dense) @ psi.amplitudes
                oracle = np.vdot(state, mz @ state).real
                self.assertAlmostEqual(value, oracle, delta=1e-9)

    def test_initial_value_is_direct_expectation(self) -> None:
        psi = product_state(ProductStateParams(1.3, 0.9, 4))
        profile = overlap_profile(psi, self.spectrum)
        trace = evolve_expectation(profile.coefficients, self.spectrum, self.mz, np.array([0.0]))
        direct = self.mz.expectation(psi.amplitudes).real
        self.assertAlmostEqual(trace.values[0], direct, delta=1e-10 * 4)

    def test_eigenstate_is_stationary(self) -> None:
        coefficients = np.zeros(self.spectrum.dimension, dtype=np.complex128)
        coefficients[3] = 1.0
        trace = evolve_expectation(coefficients, self.spectrum, self.mz, np.linspace(0.0, 50.0, 101))
        self.assertLess(float(np.ptp(trace.values)), 1e-10 * 4)

    def test_norm_is_preserved(self) -> None:
        psi = product_state(ProductStateParams(2.0, 1.0, 4))
        states = evolve_state(overlap_profile(psi, self.spectrum).coefficients, self.spectrum, np.linspace(0, 30, 31))
        np.testing.assert_allclose(np.linalg.norm(states, axis=0), 1.0, atol=1e-10)

    def test_rejects_bad_inputs(self) -> None:
        coefficients = np.zeros(self.spectrum.dimension, dtype=np.complex128)
        coefficients[0] = 1.0
        with self.assertRaises(ThermboundInputError):
            evolve_expectation(coefficients, self.spectrum, self.mz, np.array([0.0, math.inf]))
        with self.assertRaises(ThermboundInputError):
            evolve_expectation(coefficients[:8], self.spectrum, self.mz, np.array([0.0]))
        with self.assertRaises(ThermboundInputError):
            evolve_expectation(coefficients, self.spectrum, build_magnetization(3), np.array([0.0]))


class TimeAverageTests(unittest.TestCase):
    def test_constant_trace(self) -> None:
        trace = TimeTrace(np.linspace(0.0, 5.0, 11), np.full(11, 2.5))
        self.assertAlmostEqual(time_average(trace), 2.5)
        self.assertAlmostEqual(time_variance(trace), 0.0)

    def test_trapezoid_of_a_ramp(self) -> None:
        self.assertAlmostEqual(time_average(TimeTrace(np.array([0.0, 1.0]), np.array([0.0, 1.0]))), 0.5)

    def test_needs_two_samples(self) -> None:
        with self.assertRaises(ThermboundInputError):
            time_average(TimeTrace(np.array([0.0]), np.array([1.0])))

    def test_trace_times_must_increase(self) -> None:
        with self.assertRaises(ThermboundInputError):
            TimeTrace(np.array([0.0, 0.0]), np.array([1.0, 1.0]))

    def test_time_grid_is_inclusive(self) -> None:
        grid = time_grid(0.0, 40.0, 0.05)
        self.assertEqual(grid.size, 801)
        self.assertAlmostEqual(grid[-1], 40.0)
        with self.assertRaises(ThermboundInputError):
            time_grid(1.0, 0.0, 0.1)

    def test_time_grid_stops_at_or_before_stop(self) -> None:
        grid = time_grid(0.0, 0.35, 0.1)
        self.assertEqual(grid.size, 4)
        self.assertAlmostEqual(grid[-1], 0.3)
        self.assertEqual(time_grid(0.0, 0.3, 0.1).size, 4)
        self.assertEqual(time_grid(1.0, 1.05, 0.1).tolist(), [1.0])

    def test_long_time_average_matches_diagonal_ensemble(self) -> None:
        spec = ChainSpec(6, boundary="open")
        spectrum = diagonalize(build_hamiltonian(spec))
        mz = build_magnetization(6)
        diag = np.einsum("in,i,in->n", spectrum.eigenvectors.conj(), mz.data, spectrum.eigenvectors).real
        times = time_grid(0.0, 2000.0, 0.1)
        for theta, phi in ((0.0, 0.0), (math.pi / 2, 1.0), (1.0, 2.0), (2.2, 0.4), (0.5, 5.0)):
            with self.subTest(theta=theta, phi=phi):
                profile = overlap_profile(product_state(ProductStateParams(theta, phi, 6)), spectrum)
                trace = evolve_expectation(profile.coefficients, spectrum, mz, times)
                self.assertAlmostEqual(
                    time_average(trace), diagonal_average(profile.weights, diag), delta=0.01 * 6
                )


class ExactFluctuationTests(unittest.TestCase):
    def test_stationary_state(self) -> None:
        a_energy = np.array([[1.0, 0.3], [0.3, -1.0]])
        self.assertEqual(exact_fluctuation(np.array([1.0, 0.0]), a_energy), 0.0)

    def test_two_level_sigma_x(self) -> None:
        sigma_x = np.array([[0.0, 1.0], [1.0, 0.0]])
        self.assertAlmostEqual(exact_fluctuation(np.array([0.5, 0.5]), sigma_x), 0.5)

    def test_capability_limit(self) -> None:
        huge = np.broadcast_to(0.0, (4097, 4097))
        with self.assertRaises(ThermboundCapabilityError):
            exact_fluctuation(np.full(4097, 1 / 4097), huge)

    def test_matches_long_time_variance_for_generic_gaps(self) -> None:
        rng = np.random.default_rng(11)
        energies = np.array([0.0, 1.0, 2.7, 4.9, 8.3])
        spectrum = Spectrum(energies, random_unitary(5, rng))
        raw = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
        observable = HermitianOperator.dense((raw + raw.conj().T) / 2)
        psi = rng.normal(size=5) + 1j * rng.normal(size=5)
        coefficients = spectrum.eigenvectors.conj().T @ (psi / np.linalg.norm(psi))
        weights = np.abs(coefficients) ** 2

        exact = exact_fluctuation(weights, energy_basis_operator(spectrum, observable))
        trace = evolve_expectation(coefficients, spectrum, observable, time_grid(0.0, 5000.0, 0.02))
        self.assertAlmostEqual(time_variance(trace), exact, delta=0.03 * exact)

    def test_energy_basis_operator_is_cached(self) -> None:
        spectrum = diagonalize(build_hamiltonian(ChainSpec(3)))
        mz = build_magnetization(3)
        self.assertIs(energy_basis_operator(spectrum, mz), energy_basis_operator(spectrum, mz))
        clear_energy_basis_cache()
        self.assertEqual(energy_basis_operator.cache_info().currsize, 0)


class FluctuationBoundTests(unittest.TestCase):
    def test_bound_for_magnetization(self) -> None:
        report = fluctuation_bound(build_magnetization(12), 144.0)
        self.assertEqual(report.operator_norm, 12.0)
        self.assertEqual(report.bound, 1.0)
        self.assertAlmostEqual(report.literal_bound, 12.0 / 144.0)
        self.assertIsNone(report.satisfied)

    def test_eigenstate_bound(self) -> None:
        with redirect_stderr(io.StringIO()):
            report = fluctuation_bound(build_magnetization(4), 1.0, exact_variance=0.0, n_spins=4)
        self.assertEqual(report.bound, 16.0)
        self.assertTrue(report.satisfied)
        self.assertEqual(report.per_spin_variance, 0.0)

    def test_rejects_d_eff_below_one(self) -> None:
        with self.assertRaises(ThermboundInputError):
            fluctuation_bound(build_magnetization(4), 0.5)

    def test_bound_dominates_exact_fluctuation(self) -> None:
        spec = ChainSpec(6)
        spectrum = diagonalize(build_hamiltonian(spec))
        mz = build_magnetization(6)
        a_energy = energy_basis_operator(spectrum, mz)
        rng = np.random.default_rng(5)
        ratios = []
        with redirect_stderr(io.StringIO()):
            for theta, phi in zip(rng.uniform(0, math.pi, 25), rng.uniform(0, 2 * math.pi, 25)):
                profile = overlap_profile(product_state(ProductStateParams(theta, phi, 6)), spectrum)
                exact = exact_fluctuation(profile.weights, a_energy)
                report = fluctuation_bound(mz, profile.d_eff, exact, 6)
                self.assertTrue(report.satisfied)
                ratios.append(report.bound / max(exact, 1e-300))
        self.assertLess(min(ratios), 1e3)


if __name__ == "__main__":
    unittest.main()
