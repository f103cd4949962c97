"""Snapshot files and delimited tables.

Snapshot layout (little-endian): b"GPE1", u32 version, u64 num_points,
f64 z_min, f64 z_max, f64 time, f64 beta, then num_points (re, im) f64 pairs.
"""
from __future__ import annotations

import csv
import math
import struct
from pathlib import Path

import numpy as np

from .dynamics import Wavefunction
from .grid import Grid

MAGIC = b"GPE1"
VERSION = 1
_HEADER = struct.Struct("<4sIQdddd")


class SnapshotFormatError(ValueError):
    pass


def write_snapshot(path, psi: Wavefunction, beta: float) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    grid = psi.grid
    header = _HEADER.pack(MAGIC, VERSION, grid.num_points, grid.z_min, grid.z_max, float(psi.time), float(beta))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(psi.values, dtype="<c16").tobytes())
    return path


def read_snapshot(path) -> tuple[Wavefunction, float]:
    """Returns (wavefunction, beta)."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise SnapshotFormatError(f"{path}: truncated header")
    magic, version, num_points, z_min, z_max, time, beta = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotFormatError(f"{path}: unsupported version {version}")
    payload = data[_HEADER.size:]
    if len(payload) != 16 * num_points:
        raise SnapshotFormatError(f"{path}: expected {num_points} samples, found {len(payload) / 16:g}")
    values = np.frombuffer(payload, dtype="<c16").astype(complex)
    grid = Grid(z_min, z_max, int(num_points))
    return Wavefunction(grid, values, time), beta


def _fmt(value):
    if isinstance(value, str):
        return value
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    return "nan" if math.isnan(value) else repr(value)


def write_table(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])
    return path


def read_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def write_trajectory(path, record) -> Path:
    t, n_a, n, n_b, currents = record.arrays()
    header = ["time", "N_A", "N", "N_B"] + [f"j_at_{z:.6g}" for z in record.probe_positions]
    rows = (
        [t[i], n_a[i], n[i], n_b[i], *currents[i]] for i in range(len(t))
    )
    return write_table(path, header, rows)


def read_trajectory(path) -> dict:
    header, rows = read_table(path)
    data = np.array([[float(x) for x in row] for row in rows]).reshape(len(rows), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def write_plateaux(path, report) -> Path:
    rows = ((a, b, j0, t0) for (a, b), j0, t0 in zip(report.intervals, report.j0, report.t0))
    return write_table(path, ["t_start", "t_end", "j0", "t0"], rows)


BAND_COLUMNS = ["q", "branch", "energy", "mu", "theta", "phi"]
D_COLUMNS = ["mu", "beta", "s", "d0", "d1", "n", "deltaN"]
SWEEP_COLUMNS = ["axis", "value", "j0", "t0", "plateau_start", "plateau_end", "N_final"]


def write_bands(path, points) -> Path:
    rows = ((p.q, p.branch_label, p.energy_per_particle, p.chemical_potential, p.theta, p.phi) for p in points)
    return write_table(path, BAND_COLUMNS, rows)


def write_d_table(path, solutions) -> Path:
    from .bloch import delta_N

    rows = ((d.mu, d.beta, d.s, d.d0, d.d1, d.n, delta_N(d)) for d in solutions)
    return write_table(path, D_COLUMNS, rows)
