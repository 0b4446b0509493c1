from __future__ import annotations

import json
import math
import tempfile
import unittest
from pathlib import Path

from thermbound.config_loader import load_run_config
from thermbound.errors import ThermboundConfigError
from thermbound.hilbert import Boundary


def _write_config(directory: Path, body: str, name: str = "run.json") -> Path:
    path = directory / name
    path.write_text(body, encoding="utf-8")
    return path


class LoadRunConfigTests(unittest.TestCase):
    def test_defaults_without_a_file(self) -> None:
        cfg = load_run_config()
        self.assertEqual(cfg.model.n_spins, 10)
        self.assertAlmostEqual(cfg.model.field, 0.51)
        self.assertIs(cfg.model.boundary, Boundary.PERIODIC)
        self.assertAlmostEqual(cfg.state.theta, math.pi / 2)
        self.assertIsNone(cfg.state.eigenstate_index)
        self.assertEqual(cfg.time_grid.step, 0.05)
        self.assertEqual(cfg.sweep.theta_points, 64)
        self.assertEqual(cfg.scaling.n_range, tuple(range(6, 14)))
        self.assertEqual(cfg.eth.observable, "magnetization")
        self.assertIsNone(cfg.cache_dir)
        self.assertGreaterEqual(cfg.workers, 1)
        self.assertEqual(cfg.seed, 0)

    def test_document_is_merged_over_defaults(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            path = _write_config(
                Path(tmp),
                json.dumps({"model": {"n_spins": 6, "boundary": "open"}, "time_grid": {"stop": 5.0}}),
            )
            cfg = load_run_config(path)
        self.assertEqual(cfg.model.n_spins, 6)
        self.assertIs(cfg.model.boundary, Boundary.OPEN)
        self.assertAlmostEqual(cfg.model.field, 0.51)
        self.assertEqual(cfg.time_grid.stop, 5.0)
        self.assertEqual(cfg.time_grid.start, 0.0)

    def test_overrides_win_over_document(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            path = _write_config(root, json.dumps({"workers": 3, "seed": 4, "output_dir": "a"}))
            cfg = load_run_config(path, {"out": root / "b", "workers": 1, "cache": None, "seed": 9})
        self.assertEqual(cfg.output_dir, root / "b")
        self.assertEqual(cfg.workers, 1)
        self.assertIsNone(cfg.cache_dir)
        self.assertEqual(cfg.seed, 9)

    def test_unknown_override_is_rejected(self) -> None:
        with self.assertRaises(ThermboundConfigError):
            load_run_config(None, {"colour": "red"})

    def test_unknown_keys_are_rejected(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            for body in ('{"modle": {}}', '{"model": {"spins": 4}}', '{"model": 4}'):
                with self.subTest(body=body):
                    with self.assertRaises(ThermboundConfigError):
                        load_run_config(_write_config(Path(tmp), body))

    def test_types_are_checked(self) -> None:
        bad_documents = [
            {"model": {"n_spins": 6.5}},
            {"model": {"n_spins": True}},
            {"model": {"field": "strong"}},
            {"sweep": {"with_fluctuation": 1}},
            {"workers": 0},
            {"time_grid": {"step": 0.0}},
            {"time_grid": {"start": 2.0, "stop": 1.0}},
            {"scaling": {"n_range": []}},
            {"eth": {"observable": "energy"}},
        ]
        with tempfile.TemporaryDirectory() as tmp:
            for document in bad_documents:
                with self.subTest(document=document):
                    with self.assertRaises(ThermboundConfigError):
                        load_run_config(_write_config(Path(tmp), json.dumps(document)))

    def test_invalid_model_is_reported_as_config_error(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            for model in ({"boundary": "twisted"}, {"n_spins": 2}):
                with self.subTest(model=model):
                    path = _write_config(Path(tmp), json.dumps({"model": model}))
                    with self.assertRaises(ThermboundConfigError) as ctx:
                        load_run_config(path)
                    self.assertIn("Invalid model", str(ctx.exception))

    def test_non_finite_and_duplicate_keys_are_rejected(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            with self.assertRaises(ThermboundConfigError):
                load_run_config(_write_config(root, '{"model": {"field": NaN}}'))
            with self.assertRaises(ThermboundConfigError):
                load_run_config(_write_config(root, '{"seed": 1, "seed": 2}'))
            with self.assertRaises(ThermboundConfigError):
                load_run_config(_write_config(root, "[1, 2]"))
            with self.assertRaises(ThermboundConfigError):
                load_run_config(_write_config(root, "{not json"))

    def test_energy_window_must_be_increasing_pair(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            for window in ([1.0], [2.0, 1.0], [0.0, 1.0, 2.0]):
                with self.subTest(window=window):
                    path = _write_config(root, json.dumps({"eth": {"energy_window": window}}))
                    with self.assertRaises(ThermboundConfigError):
                        load_run_config(path)
            cfg = load_run_config(_write_config(root, json.dumps({"eth": {"energy_window": [-1, 1]}})))
            self.assertEqual(cfg.eth.energy_window, (-1.0, 1.0))

    def test_manifest_config_block_is_accepted(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            root = Path(tmp)
            first = load_run_config(
                _write_config(root, json.dumps({"model": {"n_spins": 5}, "state": {"phi": 1.25}}))
            )
            manifest = {"manifest_version": 1, "command": "evolve", "config": first.as_dict()}
            second = load_run_config(_write_config(root, json.dumps(manifest), "manifest.json"))
            with self.assertRaises(ThermboundConfigError):
                load_run_config(_write_config(root, json.dumps({"manifest_version": 1}), "empty.json"))
        self.assertEqual(second.model, first.model)
        self.assertEqual(second.state, first.state)
        self.assertEqual(second.as_dict(), first.as_dict())

    def test_missing_file(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ThermboundConfigError):
                load_run_config(Path(tmp) / "absent.json")
            with self.assertRaises(ThermboundConfigError):
                load_run_config(Path(tmp))


if __name__ == "__main__":
    unittest.main()
