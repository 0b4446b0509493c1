from __future__ import annotations

import io
import math
import tempfile
import unittest
from contextlib import redirect_stderr
from pathlib import Path

import numpy as np

from thermbound import scaling
from thermbound.errors import ThermboundInputError
from thermbound.hilbert import ChainSpec
from thermbound.parallel import parallel_map
from thermbound.scaling import (
    BetaCurve,
    angle_grid,
    beta_curve,
    deff_by_size,
    fit_exponent,
    fit_table,
    pick_contrast_states,
    rank_correlation,
    sweep_grid,
    synthetic_deff_table,
)
from thermbound.spectrum_cache import cache_path, load_or_diagonalize
from thermbound.states import ProductStateParams, overlap_profile, product_state


def _square(value: int) -> int:
    return value * value


class FitExponentTests(unittest.TestCase):
    def test_exact_exponential(self) -> None:
        n = np.arange(6, 12)
        fit = fit_exponent(n, np.exp(0.5 * n + 1.0))
        self.assertAlmostEqual(fit.beta, 0.5, places=12)
        self.assertAlmostEqual(fit.intercept, 1.0, places=10)
        self.assertAlmostEqual(fit.r_squared, 1.0, places=12)
        self.assertLess(fit.beta_stderr, 1e-7)

    def test_matches_normal_equations(self) -> None:
        n = np.array([6, 7, 8, 9, 10, 11, 12], dtype=np.float64)
        log_deff = np.array([1.9, 2.6, 2.8, 3.7, 4.1, 4.4, 5.3])
        fit = fit_exponent(n, np.exp(log_deff))

        design = np.column_stack([n, np.ones_like(n)])
        gram_inv = np.linalg.inv(design.T @ design)
        coef = gram_inv @ design.T @ log_deff
        residuals = log_deff - design @ coef
        sigma_sq = float(residuals @ residuals) / (n.size - 2)
        ss_tot = float(np.sum((log_deff - log_deff.mean()) ** 2))

        self.assertAlmostEqual(fit.beta, coef[0], places=10)
        self.assertAlmostEqual(fit.intercept, coef[1], places=9)
        np.testing.assert_allclose(fit.covariance, sigma_sq * gram_inv, rtol=1e-9)
        self.assertAlmostEqual(fit.beta_stderr, math.sqrt(sigma_sq * gram_inv[0, 0]), places=10)
        self.assertAlmostEqual(fit.r_squared, 1.0 - float(residuals @ residuals) / ss_tot, places=10)

    def test_constant_d_eff_leaves_r_squared_undefined(self) -> None:
        fit = fit_exponent([6, 7, 8, 9], [3.0, 3.0, 3.0, 3.0])
        self.assertEqual(fit.beta, 0.0)
        self.assertFalse(fit.r_squared_defined)

    def test_scaling_d_eff_moves_only_the_intercept(self) -> None:
        n = [6, 8, 10, 12]
        base = fit_exponent(n, [5.0, 9.0, 30.0, 70.0])
        scaled = fit_exponent(n, [5.0 * 4, 9.0 * 4, 30.0 * 4, 70.0 * 4])
        self.assertAlmostEqual(scaled.beta, base.beta, places=12)
        self.assertAlmostEqual(scaled.intercept - base.intercept, math.log(4.0), places=10)

    def test_rejects_bad_inputs(self) -> None:
        with self.assertRaises(ThermboundInputError):
            fit_exponent([6, 7], [1.0, 2.0])
        with self.assertRaises(ThermboundInputError):
            fit_exponent([6, 6, 6], [1.0, 2.0, 3.0])
        with self.assertRaises(ThermboundInputError):
            fit_exponent([6, 7, 8], [1.0, 0.0, 3.0])
        with self.assertRaises(ThermboundInputError):
            fit_exponent([6, 7, 8], [1.0, 2.0])


class SweepTests(unittest.TestCase):
    def setUp(self) -> None:
        self.spec = ChainSpec(6)
        self.thetas = angle_grid(4, math.pi, endpoint=True)
        self.phis = angle_grid(5, 2 * math.pi, endpoint=False)

    def _sweep(self, **kwargs: object):
        with redirect_stderr(io.StringIO()):
            return sweep_grid(self.spec, self.thetas, self.phis, **kwargs)

    def test_pole_rows_do_not_depend_on_phi(self) -> None:
        result = self._sweep()
        for row in (0, -1):
            self.assertLess(float(np.ptp(result.ne_map[row])), 1e-12)
            self.assertLess(float(np.ptp(result.log_deff_map[row])), 1e-12)

    def test_points_match_single_state_profiles(self) -> None:
        result = self._sweep()
        with redirect_stderr(io.StringIO()):
            spectrum = load_or_diagonalize(self.spec)
        for i, j in ((1, 2), (2, 4)):
            profile = overlap_profile(
                product_state(ProductStateParams(float(self.thetas[i]), float(self.phis[j]), 6)), spectrum
            )
            self.assertAlmostEqual(result.log_deff_map[i, j], math.log10(profile.d_eff), places=10)
            self.assertAlmostEqual(result.ne_map[i, j], profile.normalized_energy, places=10)

    def test_map_values_are_in_range(self) -> None:
        result = self._sweep()
        self.assertEqual(result.ne_map.shape, (4, 5))
        self.assertTrue(np.all((result.ne_map >= 0.0) & (result.ne_map <= 1.0)))
        self.assertTrue(np.all(result.log_deff_map >= -1e-12))
        self.assertTrue(np.all(result.log_deff_map <= math.log10(64) + 1e-12))
        self.assertEqual(len(result.rows()), 20)

    def test_runs_are_deterministic(self) -> None:
        first = self._sweep()
        second = self._sweep()
        self.assertTrue(np.array_equal(first.ne_map, second.ne_map))
        self.assertTrue(np.array_equal(first.log_deff_map, second.log_deff_map))

    def test_worker_pool_matches_serial(self) -> None:
        serial = self._sweep()
        pooled = self._sweep(workers=2)
        np.testing.assert_allclose(pooled.ne_map, serial.ne_map, atol=1e-12)
        np.testing.assert_allclose(pooled.log_deff_map, serial.log_deff_map, atol=1e-12)

    def test_with_fluctuation_adds_a_column(self) -> None:
        result = self._sweep(with_fluctuation=True)
        assert result.fluctuation_map is not None
        self.assertEqual(result.fluctuation_map.shape, (4, 5))
        self.assertTrue(np.all(result.fluctuation_map >= 0.0))
        self.assertEqual(len(result.rows()[0]), 5)

    def test_serial_run_releases_shared_state(self) -> None:
        self._sweep(with_fluctuation=True)
        self.assertEqual(scaling._SWEEP_STATE, {})

    def test_rejects_bad_grids(self) -> None:
        with self.assertRaises(ThermboundInputError):
            sweep_grid(self.spec, [], self.phis)
        with self.assertRaises(ThermboundInputError):
            sweep_grid(self.spec, [4.0], self.phis)
        with self.assertRaises(ThermboundInputError):
            angle_grid(0, math.pi, endpoint=True)


class BetaCurveTests(unittest.TestCase):
    def test_composition_of_size_table_and_fits(self) -> None:
        spec = ChainSpec(4)
        phis = [0.0, 1.0, 2.5]
        with redirect_stderr(io.StringIO()):
            table = deff_by_size(spec, math.pi / 2, phis, [4, 5, 6])
            curve = beta_curve(spec, math.pi / 2, phis, [4, 5, 6])
        self.assertEqual(table.deff.shape, (3, 3))
        self.assertEqual(table.n_values.tolist(), [4, 5, 6])
        for i, fit in enumerate(curve.fits):
            direct = fit_exponent(table.n_values, table.deff[i])
            self.assertAlmostEqual(fit.beta, direct.beta, places=12)
            self.assertGreater(fit.beta, 0.0)
        self.assertEqual(len(curve.rows()), 3)

    def test_cache_is_used_for_each_size(self) -> None:
        spec = ChainSpec(4)
        with tempfile.TemporaryDirectory() as tmp:
            cache_dir = Path(tmp)
            with redirect_stderr(io.StringIO()):
                first = deff_by_size(spec, 1.0, [0.3], [4, 5, 6], cache_dir=cache_dir)
            for n in (4, 5, 6):
                self.assertTrue(cache_path(cache_dir, spec.with_size(n)).is_file())
            err = io.StringIO()
            with redirect_stderr(err):
                second = deff_by_size(spec, 1.0, [0.3], [4, 5, 6], cache_dir=cache_dir)
            self.assertNotIn("cache miss", err.getvalue())
            self.assertTrue(np.array_equal(first.deff, second.deff))

    def test_synthetic_table_recovers_beta(self) -> None:
        table = synthetic_deff_table([0.0, 1.0], range(6, 13), 0.5)
        curve = fit_table(table)
        for _, beta, stderr, r_squared in curve.rows():
            self.assertAlmostEqual(beta, 0.5, places=12)
            self.assertLess(stderr, 1e-7)
            self.assertAlmostEqual(r_squared, 1.0, places=12)

    def test_rejects_theta_outside_range(self) -> None:
        with self.assertRaises(ThermboundInputError):
            deff_by_size(ChainSpec(4), -0.1, [0.0], [4, 5, 6])


class ContrastTests(unittest.TestCase):
    def test_picks_middle_and_edge(self) -> None:
        pair = pick_contrast_states([0.0, 1.0, 2.0, 3.0], [0.8, 0.52, 0.1, 0.35])
        self.assertEqual(pair.strong_phi, 1.0)
        self.assertEqual(pair.strong_ne, 0.52)
        self.assertEqual(pair.weak_phi, 2.0)

    def test_rejects_mismatched_lengths(self) -> None:
        with self.assertRaises(ThermboundInputError):
            pick_contrast_states([0.0, 1.0], [0.5])

    def test_rank_correlation(self) -> None:
        self.assertAlmostEqual(rank_correlation([1, 2, 3, 4], [10, 20, 35, 90]), 1.0)
        self.assertAlmostEqual(rank_correlation([1, 2, 3, 4], [4, 3, 2, 1]), -1.0)
        with self.assertRaises(ThermboundInputError):
            rank_correlation([1.0], [2.0])


class ThermalizationPropertyTests(unittest.TestCase):
    """Size-scaling properties of the default model at the equator of the Bloch sphere."""

    phis = angle_grid(16, 2 * math.pi, endpoint=False)
    curve: BetaCurve

    @classmethod
    def setUpClass(cls) -> None:
        with redirect_stderr(io.StringIO()):
            cls.curve = beta_curve(ChainSpec(10), math.pi / 2, cls.phis, range(6, 12))

    def test_deff_grows_exponentially_with_size(self) -> None:
        with redirect_stderr(io.StringIO()):
            curve = beta_curve(ChainSpec(12), math.pi / 2, [0.0], range(6, 13))
        fit = curve.fits[0]
        self.assertGreater(fit.beta, 0.0)
        self.assertGreaterEqual(fit.r_squared, 0.99)

    def test_beta_is_positive_and_non_monotonic_in_phi(self) -> None:
        betas = np.array([fit.beta for fit in self.curve.fits])
        self.assertTrue(np.all(betas > 0.0))
        self.assertTrue(all(math.isfinite(fit.beta_stderr) for fit in self.curve.fits))
        steps = np.diff(betas)
        self.assertTrue(np.any(steps[:-1] * steps[1:] < 0.0))

    def test_mid_spectrum_state_fluctuates_less_than_edge_state(self) -> None:
        with redirect_stderr(io.StringIO()):
            sweep = sweep_grid(ChainSpec(10), [math.pi / 2], self.phis, with_fluctuation=True)
        assert sweep.fluctuation_map is not None
        pair = pick_contrast_states(self.phis, sweep.ne_map[0])
        strong = int(np.flatnonzero(self.phis == pair.strong_phi)[0])
        weak = int(np.flatnonzero(self.phis == pair.weak_phi)[0])
        self.assertNotEqual(strong, weak)
        self.assertLess(sweep.fluctuation_map[0, strong], sweep.fluctuation_map[0, weak])
        self.assertGreater(self.curve.fits[strong].beta, self.curve.fits[weak].beta)

    def test_large_deff_means_small_fluctuation(self) -> None:
        thetas = angle_grid(16, math.pi, endpoint=True)
        with redirect_stderr(io.StringIO()):
            sweep = sweep_grid(ChainSpec(10), thetas, self.phis, with_fluctuation=True)
        assert sweep.fluctuation_map is not None
        self.assertLessEqual(rank_correlation(sweep.log_deff_map, sweep.fluctuation_map), -0.8)


class ParallelMapTests(unittest.TestCase):
    def test_preserves_order(self) -> None:
        self.assertEqual(parallel_map(_square, range(6), 2), [0, 1, 4, 9, 16, 25])
        self.assertEqual(parallel_map(_square, range(6), 1), [0, 1, 4, 9, 16, 25])

    def test_rejects_non_positive_workers(self) -> None:
        with self.assertRaises(ThermboundInputError):
            parallel_map(_square, [1], 0)
        with self.assertRaises(ThermboundInputError):
            parallel_map(_square, [1], True)


if __name__ == "__main__":
    unittest.main()
