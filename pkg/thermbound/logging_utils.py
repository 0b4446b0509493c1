"""stderr logger helpers for Thermbound."""

from __future__ import annotations

import os
import sys
import time
from contextlib import contextmanager
from datetime import datetime, timezone
from typing import Iterator

DEBUG_ENV_KEY = "THERMBOUND_DEBUG"


def utc_timestamp() -> str:
    """Return an RFC3339 UTC timestamp with second precision."""
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat().replace("+00:00", "Z")


def debug_enabled() -> bool:
    return os.getenv(DEBUG_ENV_KEY, "").strip() not in {"", "0"}


class ThermboundLogger:
    """Structured single-line records on stderr; stdout stays free for command summaries."""

    def _emit(self, level: str, message: str) -> None:
        print(f"[THERMBOUND {utc_timestamp()}] {level}: {message}", file=sys.stderr, flush=True)

    def debug(self, message: str) -> None:
        if debug_enabled():
            self._emit("DEBUG", message)

    def info(self, message: str) -> None:
        self._emit("INFO", message)

    def warn(self, message: str) -> None:
        self._emit("WARN", message)

    def error(self, message: str) -> None:
        self._emit("ERROR", message)

    @contextmanager
    def timed(self, label: str) -> Iterator[None]:
        """Log ``label`` with the wall time of the block once it completes."""
        started = time.perf_counter()
        yield
        self._emit("INFO", f"{label} in {time.perf_counter() - started:.2f}s")


LOGGER = ThermboundLogger()
