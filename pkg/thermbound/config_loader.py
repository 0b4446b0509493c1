"""Run configuration loading for Thermbound."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .eigensolve import DEFAULT_DEGENERACY_TOLERANCE, DEFAULT_GAP_MAX_DIMENSION, DEFAULT_GAP_SAMPLES
from .errors import ThermboundConfigError, ThermboundInputError
from .eth import DEFAULT_BIN_WIDTH, DEFAULT_NULL_TOLERANCE, DEFAULT_WINDOW_COUNT
from .hilbert import DEFAULT_COUPLING, DEFAULT_FIELD, Boundary, ChainSpec
from .parallel import default_workers
from .scaling import DEFAULT_N_RANGE, DEFAULT_PHI_POINTS, DEFAULT_THETA_POINTS

DEFAULT_OUTPUT_DIR = "thermbound-out"
DEFAULT_SCALING_PHI_POINTS = 16
OBSERVABLES = ("magnetization", "identity")
OVERRIDE_KEYS = {"out": "output_dir", "workers": "workers", "cache": "cache_dir", "seed": "seed"}


@dataclass(frozen=True)
class StateConfig:
    theta: float
    phi: float
    eigenstate_index: int | None


@dataclass(frozen=True)
class TimeGridConfig:
    start: float
    stop: float
    step: float


@dataclass(frozen=True)
class SweepConfig:
    theta_points: int
    phi_points: int
    with_fluctuation: bool


@dataclass(frozen=True)
class ScalingConfig:
    theta: float
    phi_values: tuple[float, ...] | None
    phi_points: int
    n_range: tuple[int, ...]
    synthetic_beta: float | None


@dataclass(frozen=True)
class EthConfig:
    observable: str
    shell_center: float
    shell_half_width: float | None
    offdiag: bool
    bin_width: float
    energy_window: tuple[float, float] | None
    null_tolerance: float
    window_count: int


@dataclass(frozen=True)
class GapConfig:
    tolerance: float
    max_dimension: int
    samples: int


@dataclass(frozen=True)
class RunConfig:
    """Validated settings for one command run."""

    model: ChainSpec
    state: StateConfig
    time_grid: TimeGridConfig
    sweep: SweepConfig
    scaling: ScalingConfig
    eth: EthConfig
    gaps: GapConfig
    output_dir: Path
    workers: int
    cache_dir: Path | None
    seed: int

    def as_dict(self) -> dict[str, Any]:
        """Canonical document; loading it back yields the same physics."""
        return {
            "model": self.model.as_dict(),
            "state": {
                "theta": self.state.theta,
                "phi": self.state.phi,
                "eigenstate_index": self.state.eigenstate_index,
            },
            "time_grid": {
                "start": self.time_grid.start,
                "stop": self.time_grid.stop,
                "step": self.time_grid.step,
            },
            "sweep": {
                "theta_points": self.sweep.theta_points,
                "phi_points": self.sweep.phi_points,
                "with_fluctuation": self.sweep.with_fluctuation,
            },
            "scaling": {
                "theta": self.scaling.theta,
                "phi_values": list(self.scaling.phi_values) if self.scaling.phi_values is not None else None,
                "phi_points": self.scaling.phi_points,
                "n_range": list(self.scaling.n_range),
                "synthetic_beta": self.scaling.synthetic_beta,
            },
            "eth": {
                "observable": self.eth.observable,
                "shell_center": self.eth.shell_center,
                "shell_half_width": self.eth.shell_half_width,
                "offdiag": self.eth.offdiag,
                "bin_width": self.eth.bin_width,
                "energy_window": list(self.eth.energy_window) if self.eth.energy_window is not None else None,
                "null_tolerance": self.eth.null_tolerance,
                "window_count": self.eth.window_count,
            },
            "gaps": {
                "tolerance": self.gaps.tolerance,
                "max_dimension": self.gaps.max_dimension,
                "samples": self.gaps.samples,
            },
            "output_dir": str(self.output_dir),
            "workers": self.workers,
            "cache_dir": str(self.cache_dir) if self.cache_dir is not None else None,
            "seed": self.seed,
        }


def default_config_values() -> dict[str, Any]:
    return {
        "model": {
            "n_spins": 10,
            "coupling": DEFAULT_COUPLING,
            "field": DEFAULT_FIELD,
            "boundary": Boundary.PERIODIC.value,
        },
        "state": {"theta": math.pi / 2, "phi": 0.0, "eigenstate_index": None},
        "time_grid": {"start": 0.0, "stop": 40.0, "step": 0.05},
        "sweep": {
            "theta_points": DEFAULT_THETA_POINTS,
            "phi_points": DEFAULT_PHI_POINTS,
            "with_fluctuation": False,
        },
        "scaling": {
            "theta": math.pi / 2,
            "phi_values": None,
            "phi_points": DEFAULT_SCALING_PHI_POINTS,
            "n_range": list(DEFAULT_N_RANGE),
            "synthetic_beta": None,
        },
        "eth": {
            "observable": OBSERVABLES[0],
            "shell_center": 0.0,
            "shell_half_width": None,
            "offdiag": False,
            "bin_width": DEFAULT_BIN_WIDTH,
            "energy_window": None,
            "null_tolerance": DEFAULT_NULL_TOLERANCE,
            "window_count": DEFAULT_WINDOW_COUNT,
        },
        "gaps": {
            "tolerance": DEFAULT_DEGENERACY_TOLERANCE,
            "max_dimension": DEFAULT_GAP_MAX_DIMENSION,
            "samples": DEFAULT_GAP_SAMPLES,
        },
        "output_dir": DEFAULT_OUTPUT_DIR,
        "workers": None,
        "cache_dir": None,
        "seed": 0,
    }


def _deep_merge_dicts(base: dict[str, Any], overlay: dict[str, Any]) -> dict[str, Any]:
    merged: dict[str, Any] = {}
    for key in set(base.keys()) | set(overlay.keys()):
        base_value = base.get(key)
        overlay_value = overlay.get(key)
        if isinstance(base_value, dict) and isinstance(overlay_value, dict):
            merged[key] = _deep_merge_dicts(base_value, overlay_value)
            continue
        merged[key] = overlay_value if key in overlay else base_value
    return merged


def _reject_unknown_keys(raw: dict[str, Any], allowed: dict[str, Any], prefix: str = "") -> None:
    for key, value in raw.items():
        dotted = f"{prefix}{key}"
        if key not in allowed:
            raise ThermboundConfigError(f"Unknown config key '{dotted}'.")
        if isinstance(allowed[key], dict):
            if not isinstance(value, dict):
                raise ThermboundConfigError(f"Config key '{dotted}' must be an object.")
            _reject_unknown_keys(value, allowed[key], f"{dotted}.")


def _no_duplicate_keys(pairs: list[tuple[str, Any]]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key, value in pairs:
        if key in out:
            raise ThermboundConfigError(f"Duplicate config key '{key}'.")
        out[key] = value
    return out


def _reject_constant(token: str) -> Any:
    raise ThermboundConfigError(f"Non-finite number '{token}' is not allowed in config.")


def _parse_json_document(path: Path) -> dict[str, Any]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ThermboundConfigError(f"Failed to read config at {path}: {exc}") from exc
    try:
        parsed = json.loads(text, object_pairs_hook=_no_duplicate_keys, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ThermboundConfigError(f"Invalid JSON in {path} at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(parsed, dict):
        raise ThermboundConfigError(f"Config root must be an object: {path}")
    # A manifest from an earlier run carries its config in a "config" block.
    if "manifest_version" in parsed:
        parsed = parsed.get("config")
        if not isinstance(parsed, dict):
            raise ThermboundConfigError(f"Manifest at {path} has no 'config' object.")
    return parsed


def _as_dict(raw: Any, key: str) -> dict[str, Any]:
    if not isinstance(raw, dict):
        raise ThermboundConfigError(f"Config key '{key}' must be an object.")
    return raw


def _as_str(raw: Any, key: str) -> str:
    if not isinstance(raw, str) or not raw.strip():
        raise ThermboundConfigError(f"Config key '{key}' must be a non-empty string.")
    return raw


def _as_int(raw: Any, key: str, *, minimum: int = 0) -> int:
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise ThermboundConfigError(f"Config key '{key}' must be an integer.")
    if raw < minimum:
        raise ThermboundConfigError(f"Config key '{key}' must be >= {minimum}.")
    return raw


def _as_float(raw: Any, key: str, *, positive: bool = False) -> float:
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise ThermboundConfigError(f"Config key '{key}' must be a number.")
    value = float(raw)
    if not math.isfinite(value):
        raise ThermboundConfigError(f"Config key '{key}' must be finite.")
    if positive and value <= 0.0:
        raise ThermboundConfigError(f"Config key '{key}' must be > 0.")
    return value


def _as_bool(raw: Any, key: str) -> bool:
    if not isinstance(raw, bool):
        raise ThermboundConfigError(f"Config key '{key}' must be a boolean.")
    return raw


def _as_float_list(raw: Any, key: str) -> tuple[float, ...]:
    if not isinstance(raw, list) or not raw:
        raise ThermboundConfigError(f"Config key '{key}' must be a non-empty list.")
    return tuple(_as_float(item, f"{key}[{idx}]") for idx, item in enumerate(raw))


def _as_int_list(raw: Any, key: str, *, minimum: int) -> tuple[int, ...]:
    if not isinstance(raw, list) or not raw:
        raise ThermboundConfigError(f"Config key '{key}' must be a non-empty list.")
    return tuple(_as_int(item, f"{key}[{idx}]", minimum=minimum) for idx, item in enumerate(raw))


def _as_path(raw: Any, key: str) -> Path:
    return Path(_as_str(raw, key)).expanduser()


def _validate_model(raw: dict[str, Any]) -> ChainSpec:
    boundary = _as_str(raw.get("boundary"), "model.boundary")
    try:
        return ChainSpec(
            n_spins=_as_int(raw.get("n_spins"), "model.n_spins", minimum=1),
            coupling=_as_float(raw.get("coupling"), "model.coupling"),
            field=_as_float(raw.get("field"), "model.field"),
            boundary=boundary,
        )
    except ThermboundInputError as exc:
        raise ThermboundConfigError(f"Invalid model: {exc}") from exc


def _validate_eth(raw: dict[str, Any]) -> EthConfig:
    observable = _as_str(raw.get("observable"), "eth.observable")
    if observable not in OBSERVABLES:
        raise ThermboundConfigError(
            f"Config key 'eth.observable' must be one of: {', '.join(OBSERVABLES)}."
        )
    window = None
    if raw.get("energy_window") is not None:
        window = _as_float_list(raw["energy_window"], "eth.energy_window")
        if len(window) != 2 or window[0] >= window[1]:
            raise ThermboundConfigError("Config key 'eth.energy_window' must be an increasing pair.")
    half_width = raw.get("shell_half_width")
    return EthConfig(
        observable=observable,
        shell_center=_as_float(raw.get("shell_center"), "eth.shell_center"),
        shell_half_width=(
            _as_float(half_width, "eth.shell_half_width", positive=True) if half_width is not None else None
        ),
        offdiag=_as_bool(raw.get("offdiag"), "eth.offdiag"),
        bin_width=_as_float(raw.get("bin_width"), "eth.bin_width", positive=True),
        energy_window=window,
        null_tolerance=_as_float(raw.get("null_tolerance"), "eth.null_tolerance", positive=True),
        window_count=_as_int(raw.get("window_count"), "eth.window_count", minimum=1),
    )


def _validate_run_config(raw: dict[str, Any]) -> RunConfig:
    model = _validate_model(_as_dict(raw.get("model"), "model"))

    state_raw = _as_dict(raw.get("state"), "state")
    index = state_raw.get("eigenstate_index")
    state = StateConfig(
        theta=_as_float(state_raw.get("theta"), "state.theta"),
        phi=_as_float(state_raw.get("phi"), "state.phi"),
        eigenstate_index=_as_int(index, "state.eigenstate_index") if index is not None else None,
    )

    grid_raw = _as_dict(raw.get("time_grid"), "time_grid")
    time_grid = TimeGridConfig(
        start=_as_float(grid_raw.get("start"), "time_grid.start"),
        stop=_as_float(grid_raw.get("stop"), "time_grid.stop"),
        step=_as_float(grid_raw.get("step"), "time_grid.step", positive=True),
    )
    if time_grid.stop <= time_grid.start:
        raise ThermboundConfigError("Config key 'time_grid.stop' must exceed 'time_grid.start'.")

    sweep_raw = _as_dict(raw.get("sweep"), "sweep")
    sweep = SweepConfig(
        theta_points=_as_int(sweep_raw.get("theta_points"), "sweep.theta_points", minimum=1),
        phi_points=_as_int(sweep_raw.get("phi_points"), "sweep.phi_points", minimum=1),
        with_fluctuation=_as_bool(sweep_raw.get("with_fluctuation"), "sweep.with_fluctuation"),
    )

    scaling_raw = _as_dict(raw.get("scaling"), "scaling")
    phi_values = scaling_raw.get("phi_values")
    beta = scaling_raw.get("synthetic_beta")
    scaling = ScalingConfig(
        theta=_as_float(scaling_raw.get("theta"), "scaling.theta"),
        phi_values=_as_float_list(phi_values, "scaling.phi_values") if phi_values is not None else None,
        phi_points=_as_int(scaling_raw.get("phi_points"), "scaling.phi_points", minimum=1),
        n_range=_as_int_list(scaling_raw.get("n_range"), "scaling.n_range", minimum=2),
        synthetic_beta=_as_float(beta, "scaling.synthetic_beta") if beta is not None else None,
    )

    gaps_raw = _as_dict(raw.get("gaps"), "gaps")
    gaps = GapConfig(
        tolerance=_as_float(gaps_raw.get("tolerance"), "gaps.tolerance", positive=True),
        max_dimension=_as_int(gaps_raw.get("max_dimension"), "gaps.max_dimension", minimum=1),
        samples=_as_int(gaps_raw.get("samples"), "gaps.samples", minimum=1),
    )

    workers = raw.get("workers")
    cache_dir = raw.get("cache_dir")
    return RunConfig(
        model=model,
        state=state,
        time_grid=time_grid,
        sweep=sweep,
        scaling=scaling,
        eth=_validate_eth(_as_dict(raw.get("eth"), "eth")),
        gaps=gaps,
        output_dir=_as_path(raw.get("output_dir"), "output_dir"),
        workers=_as_int(workers, "workers", minimum=1) if workers is not None else default_workers(),
        cache_dir=_as_path(cache_dir, "cache_dir") if cache_dir is not None else None,
        seed=_as_int(raw.get("seed"), "seed", minimum=0),
    )


def load_run_config(config_path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    """Merge built-in defaults, an optional JSON document and CLI overrides."""
    built_in = default_config_values()
    document: dict[str, Any] = {}
    if config_path is not None:
        path = Path(config_path).expanduser().resolve()
        if not path.exists():
            raise ThermboundConfigError(f"Config file not found: {path}")
        if not path.is_file():
            raise ThermboundConfigError(f"Config path is not a file: {path}")
        document = _parse_json_document(path)
        _reject_unknown_keys(document, built_in)

    merged = _deep_merge_dicts(built_in, document)
    for flag, value in (overrides or {}).items():
        if flag not in OVERRIDE_KEYS:
            raise ThermboundConfigError(f"Unknown override '{flag}'.")
        if value is not None:
            merged[OVERRIDE_KEYS[flag]] = str(value) if isinstance(value, Path) else value
    return _validate_run_config(merged)
