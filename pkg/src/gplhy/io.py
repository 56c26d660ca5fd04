"""Field snapshots and JSON reports.

Snapshot layout (little-endian)::

    8s   magic  b"GPLHYFLD"
    u32  version (1)
    u8   dtype   0 = real64, 1 = complex128
    3x   reserved (zero)
    3u32 n_x, n_y, n_z
    3f64 L_x, L_y, L_z
    f64  b
    f64  lambda
    samples, z fastest; complex samples as (re, im) pairs
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import Field, GridSpec

__all__ = ["MAGIC", "VERSION", "Snapshot", "SnapshotError", "write_snapshot", "read_snapshot", "write_json", "REPORT_KEYS"]

MAGIC = b"GPLHYFLD"
VERSION = 1
_HEADER = struct.Struct("<8sIB3x3I3d2d")

REPORT_KEYS = (
    "b",
    "lambda",
    "grid",
    "energy",
    "mu",
    "residual",
    "iterations",
    "converged",
    "virial",
    "yukawa_residual",
    "decay",
    "bounds",
    "version",
)


class SnapshotError(ValueError):
    """Malformed or unsupported snapshot file."""


@dataclass(frozen=True)
class Snapshot:
    field: Field
    b: float
    lam: float


def write_snapshot(path, psi: Field, b: float, lam: float) -> None:
    vals = psi.values
    dtype = 1 if np.iscomplexobj(vals) else 0
    header = _HEADER.pack(MAGIC, VERSION, dtype, *psi.grid.n, *psi.grid.L, float(b), float(lam))
    body = np.ascontiguousarray(vals, dtype="<c16" if dtype else "<f8").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)


def read_snapshot(path) -> Snapshot:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise SnapshotError(f"{path}: file too short for a snapshot header")
    magic, version, dtype, nx, ny, nz, Lx, Ly, Lz, b, lam = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise SnapshotError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotError(f"{path}: unsupported snapshot version {version}")
    if dtype not in (0, 1):
        raise SnapshotError(f"{path}: unknown dtype code {dtype}")
    np_dtype = np.dtype("<c16" if dtype else "<f8")
    count = nx * ny * nz
    body = raw[_HEADER.size :]
    if len(body) != count * np_dtype.itemsize:
        raise SnapshotError(f"{path}: expected {count} samples, found {len(body) // np_dtype.itemsize}")
    try:
        grid = GridSpec((nx, ny, nz), (Lx, Ly, Lz))
    except ValueError as exc:
        raise SnapshotError(f"{path}: {exc}") from exc
    vals = np.frombuffer(body, dtype=np_dtype).reshape(nx, ny, nz).astype(np_dtype.newbyteorder("="))
    return Snapshot(Field(grid, vals), float(b), float(lam))


def _clean(obj):
    """Make numpy scalars, tuples and non-finite floats JSON friendly."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def write_json(path, doc: dict) -> None:
    text = json.dumps(_clean(doc), indent=2, sort_keys=False)
    if path in (None, "-"):
        print(text)
        return
    with open(path, "w") as fh:
        fh.write(text + "\n")
