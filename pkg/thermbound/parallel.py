"""Fork-join helper over a process pool."""

from __future__ import annotations

import os
from multiprocessing import Pool
from typing import Any, Callable, Iterable, Sequence, TypeVar

from .errors import ThermboundInputError

T = TypeVar("T")
R = TypeVar("R")


def default_workers() -> int:
    """Available hardware threads."""
    return max(os.cpu_count() or 1, 1)


def parallel_map(
    func: Callable[[T], R],
    items: Iterable[T],
    workers: int = 1,
    initializer: Callable[..., None] | None = None,
    initargs: Sequence[Any] = (),
) -> list[R]:
    """Map ``func`` over ``items`` and return results in input order.

    ``initializer(*initargs)`` runs once per worker to install shared
    read-only inputs. With one worker everything runs in-process.
    """
    if isinstance(workers, bool) or workers < 1:
        raise ThermboundInputError(f"workers must be a positive integer, got {workers!r}.")
    tasks = list(items)
    if workers == 1 or len(tasks) <= 1:
        if initializer is not None:
            initializer(*initargs)
        return [func(task) for task in tasks]
    with Pool(processes=min(workers, len(tasks)), initializer=initializer, initargs=tuple(initargs)) as pool:
        return pool.map(func, tasks)
