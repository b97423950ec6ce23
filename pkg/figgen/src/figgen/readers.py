"""Readers for the solver's file formats.

series.csv columns:
    t,l2_omega,h1_omega,max_omega,q,e_gnorm,energy_residual,mode_re,mode_im

Snapshot/checkpoint binary layout (little-endian, no padding):
    magic "FSAV" | u32 version=1 | u32 nx | u32 ny | f64 lx | f64 ly |
    f64 t | u64 step | f64 q_n | f64 q_nm1 | u32 scheme_tag
followed by two nx*ny f64 physical vorticity arrays (levels n, n-1),
x varying fastest.
"""

import csv
import struct

import numpy as np

SERIES_COLUMNS = (
    "t", "l2_omega", "h1_omega", "max_omega", "q",
    "e_gnorm", "energy_residual", "mode_re", "mode_im",
)

_HEADER = struct.Struct("<4sIIIdddQddI")


class InputError(Exception):
    """Missing or malformed input file."""


def read_series(path):
    """Columns of series.csv as a dict of float arrays."""
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        if tuple(header) != SERIES_COLUMNS:
            raise InputError(f"{path}: unexpected header {header!r}")
        rows = []
        for i, row in enumerate(reader, start=1):
            if len(row) != len(SERIES_COLUMNS):
                raise InputError(f"{path}: row {i} has {len(row)} fields")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise InputError(f"{path}: row {i}: {exc}") from None
    data = np.asarray(rows, dtype=float).reshape(-1, len(SERIES_COLUMNS))
    return {name: data[:, j] for j, name in enumerate(SERIES_COLUMNS)}


def read_table(path, columns):
    """Small two-or-more column CSV (bursts/intervals/psd outputs)."""
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != tuple(columns):
            raise InputError(f"{path}: unexpected header {header!r}")
        rows = [[float(v) for v in row] for row in reader if row]
    data = np.asarray(rows, dtype=float).reshape(-1, len(columns))
    return {name: data[:, j] for j, name in enumerate(columns)}


def read_snapshot(path):
    """(meta, omega) from a snapshot/checkpoint; omega is the newest level,
    shaped (nx, ny) with omega[jx, jy]."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise InputError(f"cannot open {path}: {exc}") from None
    if len(raw) < _HEADER.size:
        raise InputError(f"{path}: shorter than header")
    magic, version, nx, ny, lx, ly, t, step, q_n, q_nm1, tag = _HEADER.unpack_from(raw)
    if magic != b"FSAV":
        raise InputError(f"{path}: bad magic {magic!r}")
    if version != 1:
        raise InputError(f"{path}: unsupported version {version}")
    if len(raw) != _HEADER.size + 2 * nx * ny * 8:
        raise InputError(f"{path}: truncated payload")
    flat = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size, count=nx * ny)
    omega = np.ascontiguousarray(flat.reshape(ny, nx).T)
    meta = {"nx": nx, "ny": ny, "lx": lx, "ly": ly, "t": t, "step": step, "q_n": q_n}
    return meta, omega
