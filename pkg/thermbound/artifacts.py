"""CSV/JSON artifact writing with an atomic commit of the whole output set."""

from __future__ import annotations

import json
import math
import os
import shutil
import time
from pathlib import Path
from types import TracebackType
from typing import Any, Iterable, Sequence

import numpy as np

from . import __version__
from .errors import ThermboundError
from .logging_utils import LOGGER, utc_timestamp

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1


def format_number(value: Any) -> str:
    """Shortest round-trip text for a CSV cell."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(key): _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(item) for item in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, Path):
        return str(value)
    return value


def _write_text_atomic(path: Path, content: str) -> None:
    temp = path.with_suffix(path.suffix + ".tmp")
    temp.write_text(content, encoding="utf-8")
    temp.replace(path)


class ArtifactWriter:
    """Stage outputs in a hidden directory and move them into place on success.

    Use as a context manager; an exception inside the block discards every
    staged file.
    """

    def __init__(self, output_dir: Path, command: str, config: dict[str, Any], workers: int) -> None:
        self.output_dir = Path(output_dir)
        self.command = command
        self.config = config
        self.workers = workers
        self.staging_dir = self.output_dir / f".staging-{command}-{os.getpid()}"
        self.outputs: list[str] = []
        self._started = 0.0

    def __enter__(self) -> "ArtifactWriter":
        try:
            if self.staging_dir.exists():
                shutil.rmtree(self.staging_dir)
            self.staging_dir.mkdir(parents=True)
        except OSError as exc:
            raise ThermboundError(f"Cannot prepare output directory {self.output_dir}: {exc}") from exc
        self._started = time.perf_counter()
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc: BaseException | None,
        traceback: TracebackType | None,
    ) -> bool:
        if exc_type is not None:
            shutil.rmtree(self.staging_dir, ignore_errors=True)
            return False
        try:
            self._write_manifest()
            for name in self.outputs + [MANIFEST_NAME]:
                (self.staging_dir / name).replace(self.output_dir / name)
            self.staging_dir.rmdir()
        except OSError as exc:
            shutil.rmtree(self.staging_dir, ignore_errors=True)
            raise ThermboundError(f"Failed to commit outputs to {self.output_dir}: {exc}") from exc
        LOGGER.info(f"Wrote {len(self.outputs) + 1} file(s) to {self.output_dir}")
        return False

    def _stage(self, name: str, content: str) -> Path:
        if name in self.outputs or name == MANIFEST_NAME:
            raise ThermboundError(f"Output '{name}' written twice.")
        path = self.staging_dir / name
        try:
            _write_text_atomic(path, content)
        except OSError as exc:
            raise ThermboundError(f"Failed to write {path}: {exc}") from exc
        self.outputs.append(name)
        return self.output_dir / name

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        lines = [",".join(header)]
        lines.extend(",".join(format_number(cell) for cell in row) for row in rows)
        return self._stage(name, "\n".join(lines) + "\n")

    def write_json(self, name: str, payload: dict[str, Any]) -> Path:
        return self._stage(name, json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")

    def _write_manifest(self) -> None:
        manifest = {
            "manifest_version": MANIFEST_VERSION,
            "command": self.command,
            "software_version": __version__,
            "config": self.config,
            "created_at": utc_timestamp(),
            "wall_clock_seconds": round(time.perf_counter() - self._started, 6),
            "workers": self.workers,
            "outputs": sorted(self.outputs),
        }
        _write_text_atomic(
            self.staging_dir / MANIFEST_NAME,
            json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n",
        )
