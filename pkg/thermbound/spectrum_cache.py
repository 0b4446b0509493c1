"""On-disk spectrum cache keyed by ChainSpec hash.

File layout (all little-endian): magic ``TBSPEC01``, int64 n_spins, float64
coupling, float64 field, int64 boundary code, int64 dimension, float64
residual, then ``dimension`` float64 eigenvalues and ``dimension**2``
complex eigenvector entries (row-major, each a real/imag float64 pair).
"""

from __future__ import annotations

import fcntl
import struct
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator

import numpy as np

from .eigensolve import Spectrum, diagonalize
from .errors import ThermboundCacheError
from .hilbert import Boundary, ChainSpec, HermitianOperator, build_hamiltonian
from .logging_utils import LOGGER

MAGIC = b"TBSPEC01"
HEADER = struct.Struct("<8sqddqqd")
BOUNDARY_CODES = {Boundary.PERIODIC: 0, Boundary.OPEN: 1}


def cache_path(cache_dir: Path, spec: ChainSpec) -> Path:
    """Return the cache file path for a model."""
    return cache_dir / f"spectrum-{spec.cache_key()[:20]}.bin"


@contextmanager
def _cache_lock(path: Path) -> Iterator[None]:
    """Hold an exclusive advisory lock next to a cache entry."""
    lock_path = path.with_suffix(path.suffix + ".lock")
    lock_path.parent.mkdir(parents=True, exist_ok=True)
    with lock_path.open("a+", encoding="utf-8") as handle:
        fcntl.flock(handle.fileno(), fcntl.LOCK_EX)
        try:
            yield
        finally:
            fcntl.flock(handle.fileno(), fcntl.LOCK_UN)


def _encode(spec: ChainSpec, spectrum: Spectrum) -> bytes:
    header = HEADER.pack(
        MAGIC,
        spec.n_spins,
        spec.coupling,
        spec.field,
        BOUNDARY_CODES[spec.boundary],
        spectrum.dimension,
        spectrum.residual,
    )
    return (
        header
        + spectrum.eigenvalues.astype("<f8").tobytes()
        + spectrum.eigenvectors.astype("<c16").tobytes()
    )


def _decode(payload: bytes, spec: ChainSpec, path: Path) -> Spectrum | None:
    if len(payload) < HEADER.size:
        LOGGER.warn(f"Spectrum cache entry truncated: {path}")
        return None
    magic, n_spins, coupling, field, boundary, dimension, residual = HEADER.unpack_from(payload)
    expected = (MAGIC, spec.n_spins, spec.coupling, spec.field, BOUNDARY_CODES[spec.boundary])
    if (magic, n_spins, coupling, field, boundary) != expected or dimension != spec.dimension:
        LOGGER.warn(f"Spectrum cache header does not match model; ignoring {path}")
        return None
    body = HEADER.size + 8 * dimension + 16 * dimension * dimension
    if len(payload) != body:
        LOGGER.warn(f"Spectrum cache entry has wrong size; ignoring {path}")
        return None
    values = np.frombuffer(payload, dtype="<f8", count=dimension, offset=HEADER.size)
    vectors = np.frombuffer(
        payload,
        dtype="<c16",
        count=dimension * dimension,
        offset=HEADER.size + 8 * dimension,
    ).reshape(dimension, dimension)
    return Spectrum(values.astype(np.float64), vectors.astype(np.complex128), residual)


def load_spectrum(cache_dir: Path, spec: ChainSpec) -> Spectrum | None:
    """Return the cached spectrum for ``spec`` or None on a miss."""
    path = cache_path(cache_dir, spec)
    if not path.is_file():
        return None
    try:
        payload = path.read_bytes()
    except OSError as exc:
        raise ThermboundCacheError(f"Failed to read spectrum cache at {path}: {exc}") from exc
    return _decode(payload, spec, path)


def save_spectrum(cache_dir: Path, spec: ChainSpec, spectrum: Spectrum) -> Path:
    """Write a cache entry atomically."""
    path = cache_path(cache_dir, spec)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        temp = path.with_suffix(path.suffix + ".tmp")
        temp.write_bytes(_encode(spec, spectrum))
        temp.replace(path)
    except OSError as exc:
        raise ThermboundCacheError(f"Failed to write spectrum cache at {path}: {exc}") from exc
    return path


def load_or_diagonalize(
    spec: ChainSpec,
    cache_dir: Path | None = None,
    *,
    hamiltonian: HermitianOperator | None = None,
) -> Spectrum:
    """Diagonalize the model once per ChainSpec, reusing the cache when given."""
    if cache_dir is None:
        return diagonalize(hamiltonian or build_hamiltonian(spec))

    path = cache_path(cache_dir, spec)
    with _cache_lock(path):
        cached = load_spectrum(cache_dir, spec)
        if cached is not None:
            LOGGER.info(f"Spectrum cache hit for N={spec.n_spins} ({path.name})")
            return cached
        LOGGER.info(f"Spectrum cache miss for N={spec.n_spins}; diagonalizing")
        spectrum = diagonalize(hamiltonian or build_hamiltonian(spec))
        save_spectrum(cache_dir, spec, spectrum)
        return spectrum
