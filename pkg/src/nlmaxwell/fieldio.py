"""NMX1 binary field files and CSV slice export.

Layout (little-endian)::

    offset  size  content
    0       4     magic b"NMX1"
    4       4     u32 version (= 1)
    8       4     u32 n
    12      8     f64 l
    20      1     u8 kind (0 generic, 1 dual P, 2 primal E)
    21      3     reserved, zero
    24      24n^3 f64 payload, component-major, x index fastest

The file size is ``24 + 24 n^3`` bytes.
"""

from __future__ import annotations

import csv
import os
import struct
from pathlib import Path

import numpy as np

from .field_core import GridSpec, VectorField

MAGIC = b"NMX1"
VERSION = 1
HEADER = struct.Struct("<4sIIdB3x")
KIND_GENERIC, KIND_DUAL, KIND_PRIMAL = 0, 1, 2
KIND_NAMES = {KIND_GENERIC: "generic", KIND_DUAL: "dual P", KIND_PRIMAL: "primal E"}
AXES = {"x": 0, "y": 1, "z": 2}

assert HEADER.size == 24


class FieldFileError(ValueError):
    """Corrupt or inconsistent field file."""


class CorruptHeaderError(FieldFileError):
    pass


class SizeMismatchError(FieldFileError):
    pass


def _payload(f: VectorField) -> bytes:
    # (c, ix, iy, iz) -> per component with ix fastest
    return np.ascontiguousarray(f.data.transpose(0, 3, 2, 1), dtype="<f8").tobytes()


def write_field(f: VectorField, kind: int, path) -> None:
    if kind not in KIND_NAMES:
        raise ValueError(f"unknown field kind {kind}")
    header = HEADER.pack(MAGIC, VERSION, f.grid.n, f.grid.l, kind)
    Path(path).write_bytes(header + _payload(f))


def read_header(path) -> dict:
    raw = Path(path).read_bytes()
    return _parse_header(raw)


def _parse_header(raw: bytes) -> dict:
    if len(raw) < HEADER.size:
        raise SizeMismatchError(f"file has {len(raw)} bytes, shorter than the 24-byte header")
    magic, version, n, l, kind = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise CorruptHeaderError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise CorruptHeaderError(f"unsupported version {version}")
    if kind not in KIND_NAMES:
        raise CorruptHeaderError(f"unknown field kind {kind}")
    if raw[21:24] != b"\0\0\0":
        raise CorruptHeaderError("reserved header bytes are not zero")
    try:
        grid = GridSpec(n, l)
    except ValueError as exc:
        raise CorruptHeaderError(str(exc)) from exc
    expected = HEADER.size + 24 * n**3
    if len(raw) != expected:
        raise SizeMismatchError(f"file has {len(raw)} bytes, expected {expected} for n = {n}")
    return {"version": version, "n": n, "l": l, "kind": kind, "grid": grid}


def read_field(path) -> VectorField:
    return read_field_with_kind(path)[0]


def read_field_with_kind(path) -> tuple[VectorField, int]:
    raw = Path(path).read_bytes()
    info = _parse_header(raw)
    n = info["n"]
    arr = np.frombuffer(raw, dtype="<f8", offset=HEADER.size).reshape(3, n, n, n)
    data = arr.transpose(0, 3, 2, 1).astype(np.float64)
    try:
        return VectorField(info["grid"], data), info["kind"]
    except ValueError as exc:
        raise FieldFileError(f"invalid payload: {exc}") from exc


def export_slice(path_in, axis: str, index: int, path_out_csv) -> int:
    """Write one plane of a field file as CSV; returns the number of data rows."""
    if axis not in AXES:
        raise ValueError(f"axis must be one of x, y, z; got {axis!r}")
    f = read_field(path_in)
    n = f.grid.n
    if not 0 <= index < n:
        raise IndexError(f"slice index {index} out of range 0..{n - 1}")
    plane = np.take(f.data, index, axis=1 + AXES[axis])  # (3, n, n) over the other two axes
    mag = np.sqrt(np.sum(plane**2, axis=0))
    tmp = f"{path_out_csv}.tmp{os.getpid()}"
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "c1", "c2", "c3", "magnitude"])
        for i in range(n):
            for j in range(n):
                w.writerow([i, j] + [format(v, ".17g") for v in (*plane[:, i, j], mag[i, j])])
    os.replace(tmp, path_out_csv)
    return n * n
