"""Field snapshot files.

Layout: 32-byte header, then the values row-major as little-endian
float64.  Header bytes 0..3 are the magic ``KGF1``, bytes 4..7 are zero
padding, bytes 8..31 hold (dim, n, length) each as little-endian float64.
"""

from __future__ import annotations

import struct

import numpy as np

from .grid import Field, TorusGrid

__all__ = ["write_field", "read_field", "MAGIC"]

MAGIC = b"KGF1"
_HEADER = struct.Struct("<4s4x3d")


def write_field(path, field: Field) -> None:
    g = field.grid
    header = _HEADER.pack(MAGIC, float(g.dim), float(g.n), g.length)
    payload = np.ascontiguousarray(field.values, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_field(path) -> Field:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValueError(f"snapshot too short: {len(raw)} bytes")
    magic, dim_f, n_f, length = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}, expected {MAGIC!r}")
    dim, n = int(dim_f), int(n_f)
    if dim_f != dim or n_f != n:
        raise ValueError(f"non-integer grid parameters in header: dim={dim_f}, n={n_f}")
    grid = TorusGrid(dim, n, length)
    expected = n**dim
    payload = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if payload.size != expected:
        raise ValueError(f"payload holds {payload.size} values, grid needs {expected}")
    return Field(grid, payload.reshape(grid.shape).astype(float))
