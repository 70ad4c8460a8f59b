"""Diagnostics CSV and binary checkpoint files.

Checkpoint layout (all little-endian): magic "IVBK1", one version byte
(0x01), n as uint32, time as float64, then twelve n^3 float64 blocks in
x-fastest order: u1, u2, u3, then the deformation columns in k order with
components within each column.
"""

import struct

import numpy as np

from .diagnostics import CSV_COLUMNS, DiagnosticsRecord
from .fields import State
from .spectral import Grid

MAGIC = b"IVBK1"
VERSION = 1
_HEADER = struct.Struct("<Id")


class CheckpointError(RuntimeError):
    pass


class BadMagicError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


def write_diagnostics(records, path) -> None:
    """CSV with the fixed header, one row per record, 17 significant digits."""
    records = list(records)
    if not records:
        raise ValueError("refusing to write an empty diagnostics file")
    times = [rec.time for rec in records]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("record times must be strictly increasing")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for rec in records:
            fh.write(",".join(f"{v:.17g}" for v in rec.row()) + "\n")


def read_diagnostics(path):
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != ",".join(CSV_COLUMNS):
            raise ValueError(f"unexpected diagnostics header in {path}")
        records = []
        for line in fh:
            values = [float(tok) for tok in line.strip().split(",")]
            records.append(DiagnosticsRecord(*values))
    return records


def write_checkpoint(state: State, path) -> None:
    n = state.grid.n
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(bytes([VERSION]))
        fh.write(_HEADER.pack(n, state.time))
        for c in range(3):
            fh.write(np.asarray(state.u[c], dtype="<f8").tobytes(order="F"))
        for k in range(3):
            for c in range(3):
                fh.write(np.asarray(state.f[k, c], dtype="<f8").tobytes(order="F"))


def read_checkpoint(path) -> State:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:5] != MAGIC:
        raise BadMagicError(f"{path}: bad magic {blob[:5]!r}, expected {MAGIC!r}")
    version = blob[5]
    if version != VERSION:
        raise VersionMismatchError(f"{path}: format version {version}, expected {VERSION}")
    header_end = 6 + _HEADER.size
    if len(blob) < header_end:
        raise TruncatedCheckpointError(
            f"{path}: expected at least {header_end} bytes, got {len(blob)}")
    n, time = _HEADER.unpack(blob[6:header_end])
    expected = header_end + 12 * n**3 * 8
    if len(blob) != expected:
        raise TruncatedCheckpointError(
            f"{path}: expected {expected} bytes for n={n}, got {len(blob)}")

    grid = Grid(n)
    data = np.frombuffer(blob, dtype="<f8", offset=header_end)
    u = np.empty((3, n, n, n))
    f = np.empty((3, 3, n, n, n))
    block = n**3
    for c in range(3):
        u[c] = data[c * block:(c + 1) * block].reshape(n, n, n, order="F")
    for k in range(3):
        for c in range(3):
            off = (3 + 3 * k + c) * block
            f[k, c] = data[off:off + block].reshape(n, n, n, order="F")
    return State(grid, time, u, f)
