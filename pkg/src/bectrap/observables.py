"""Densities, currents, region populations and stationary-current extraction."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, PotentialSpec, spectral_gradient


@dataclass(frozen=True)
class RegionPartition:
    """Split points of the periodic cell: A = [z_min, 0), lattice = [0, L], B = (L, z_max).

    The wall regions are assigned to the reservoir they bound, so the three
    populations add up to the total norm.
    """

    lattice_start: float
    lattice_end: float

    @classmethod
    def from_spec(cls, spec: PotentialSpec) -> "RegionPartition":
        return cls(0.0, spec.L)

    def masks(self, grid: Grid):
        z = grid.z
        a = z < self.lattice_start
        b = z > self.lattice_end
        return a, ~(a | b), b


@dataclass
class SnapshotEntry:
    requested_time: float
    time: float
    path: str | None = None
    state: object = None


@dataclass
class TrajectoryRecord:
    probe_positions: np.ndarray = field(default_factory=lambda: np.zeros(0))
    times: list = field(default_factory=list)
    N_A: list = field(default_factory=list)
    N: list = field(default_factory=list)
    N_B: list = field(default_factory=list)
    probe_currents: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    final_state: object = None

    def append(self, t, n_a, n, n_b, currents):
        self.times.append(float(t))
        self.N_A.append(float(n_a))
        self.N.append(float(n))
        self.N_B.append(float(n_b))
        self.probe_currents.append(np.asarray(currents, dtype=float))

    def arrays(self):
        """(times, N_A, N, N_B, currents[num_samples, num_probes]) as numpy arrays."""
        currents = np.array(self.probe_currents).reshape(len(self.times), -1)
        return (np.array(self.times), np.array(self.N_A), np.array(self.N),
                np.array(self.N_B), currents)

    def __len__(self):
        return len(self.times)


def density(psi) -> np.ndarray:
    return np.abs(psi.values) ** 2


def current_field(psi) -> np.ndarray:
    """j = Im(psi* d_z psi), with a spectral derivative."""
    dpsi = spectral_gradient(psi.values, psi.grid)
    return np.imag(np.conj(psi.values) * dpsi)


def _interpolate(coeffs: np.ndarray, grid: Grid, points: np.ndarray) -> np.ndarray:
    # trigonometric interpolant of a periodic field from its FFT coefficients
    k = grid.wavenumbers
    phase = np.exp(1j * np.outer(np.asarray(points) - grid.z_min, k))
    return phase @ coeffs / grid.num_points


def current_at(psi, points) -> np.ndarray:
    """Current evaluated at arbitrary positions via spectral interpolation."""
    points = np.atleast_1d(np.asarray(points, dtype=float))
    if points.size == 0:
        return np.zeros(0)
    grid = psi.grid
    coeffs = np.fft.fft(psi.values)
    ik = 1j * grid.wavenumbers
    ik[grid.num_points // 2] = 0.0
    values = _interpolate(coeffs, grid, points)
    derivs = _interpolate(ik * coeffs, grid, points)
    return np.imag(np.conj(values) * derivs)


def region_numbers(psi, partition: RegionPartition, method: str = "grid"):
    """Populations (N_A, N, N_B).

    method="grid" sums |psi|^2 dz over the grid points in each region (the
    trapezoid rule on a periodic grid); method="spectral" integrates
    |psi|^2 of the trigonometric interpolant of psi exactly between the split
    points, consistent with the probe currents.
    """
    if method == "grid":
        rho = density(psi)
        return tuple(float(np.sum(rho[m]) * psi.grid.dz) for m in partition.masks(psi.grid))
    if method != "spectral":
        raise ValueError(f"unknown method {method!r}")
    coeffs, k = _density_spectrum(psi)
    total = float(coeffs[0].real * psi.grid.length)
    n_a = _integral_from_origin(coeffs, k, partition.lattice_start - psi.grid.z_min)
    n_lattice = _integral_from_origin(coeffs, k, partition.lattice_end - psi.grid.z_min) - n_a
    return n_a, n_lattice, total - n_a - n_lattice


def _density_spectrum(psi):
    """Fourier coefficients and wavenumbers of |psi|^2 for the interpolant of psi.

    psi is zero-padded to twice the points before squaring, so the density is
    represented without aliasing and matches the interpolant used by current_at.
    """
    grid = psi.grid
    n = grid.num_points
    c = np.fft.fft(psi.values)
    padded = np.zeros(2 * n, dtype=complex)
    padded[:n // 2] = c[:n // 2]
    padded[-(n - n // 2):] = c[n // 2:]
    fine = np.fft.ifft(padded) * 2
    k = 2 * np.pi * np.fft.fftfreq(2 * n, d=grid.dz / 2)
    return np.fft.fft(np.abs(fine) ** 2) / (2 * n), k


def _integral_from_origin(coeffs: np.ndarray, k: np.ndarray, x: float) -> float:
    """Exact integral of the trigonometric series sum c_k exp(i k z') over z' in [0, x]."""
    out = coeffs[0].real * x
    nz = k != 0
    out += np.sum(coeffs[nz] * (np.exp(1j * k[nz] * x) - 1.0) / (1j * k[nz])).real
    return float(out)


def average_lattice_density(N: float, L: float) -> float:
    if not L > 0:
        raise ValueError(f"lattice length must be positive, got {L}")
    return N / L


def speed_of_sound(psi, beta: float) -> np.ndarray:
    """Local Bogoliubov sound speed sqrt(beta |psi|^2)."""
    values = psi.values if hasattr(psi, "values") else np.asarray(psi)
    return np.sqrt(beta * np.abs(values) ** 2)


@dataclass
class PlateauReport:
    intervals: list = field(default_factory=list)
    j0: list = field(default_factory=list)
    t0: list = field(default_factory=list)
    threshold: float = 0.0

    def __len__(self):
        return len(self.intervals)

    @property
    def durations(self):
        return [b - a for a, b in self.intervals]


def _slope(t, y):
    tc = t - t.mean()
    return float(np.dot(tc, y - y.mean()) / np.dot(tc, tc))


def _sliding_slopes(t, y, width):
    # least-squares slope of every contiguous window of `width` samples
    kernel = np.ones(width)
    s_t = np.convolve(t, kernel, "valid")
    s_y = np.convolve(y, kernel, "valid")
    s_tt = np.convolve(t * t, kernel, "valid")
    s_ty = np.convolve(t * y, kernel, "valid")
    return (width * s_ty - s_t * s_y) / (width * s_tt - s_t**2)


def default_threshold(times, N_B) -> float:
    """5% of the median |dN_B/dt| over the record."""
    rate = np.abs(np.gradient(np.asarray(N_B, float), np.asarray(times, float)))
    return 0.05 * float(np.median(rate))


def detect_plateaux(record, window: float | None = None, threshold: float | None = None,
                    min_duration: float | None = None) -> PlateauReport:
    """Intervals where the lattice population N(t) is flat.

    Every window of duration `window` whose fitted |dN/dt| is below
    `threshold` marks its samples as flat; overlapping flat windows are
    merged.  Per interval, j0 is the fitted slope of N_B(t).
    """
    t, _, n, n_b, _ = as_series(record)
    if len(t) < 3:
        raise ValueError("record too short for plateau detection")
    span = t[-1] - t[0]
    if window is None:
        window = 0.05 * span
    dt = float(np.median(np.diff(t)))
    width = max(3, int(round(window / dt)) + 1)
    if width > len(t):
        raise ValueError(f"record of duration {span:g} is shorter than the window {window:g}")
    if threshold is None:
        threshold = default_threshold(t, n_b)

    slopes = _sliding_slopes(t, n, width)
    flat = np.zeros(len(t), dtype=bool)
    for i in np.flatnonzero(np.abs(slopes) < threshold):
        flat[i:i + width] = True

    report = PlateauReport(threshold=threshold)
    edges = np.flatnonzero(np.diff(np.concatenate(([0], flat.astype(np.int8), [0]))))
    for start, stop in zip(edges[::2], edges[1::2]):
        a, b = t[start], t[stop - 1]
        if min_duration is not None and b - a < min_duration:
            continue
        sel = slice(start, stop)
        report.intervals.append((float(a), float(b)))
        report.j0.append(_slope(t[sel], n_b[sel]))
        report.t0.append(0.5 * float(a + b))
    return report


def as_series(record):
    """(times, N_A, N, N_B, currents or None) from a TrajectoryRecord or a mapping."""
    if isinstance(record, TrajectoryRecord):
        return record.arrays()
    # accepts the column names of trajectory.csv as well
    times = record["times"] if "times" in record else record["time"]
    t, n_a, n, n_b = (np.asarray(x, float) for x in (times, record["N_A"], record["N"], record["N_B"]))
    return t, n_a, n, n_b, None


def stationary_current(record, report: PlateauReport | None = None, **kwargs) -> tuple[float, PlateauReport]:
    """j0 from the longest plateau; without a plateau, dN_B/dt fitted over the
    middle half of the record."""
    t, _, _, n_b, _ = as_series(record)
    if len(t) < 4:
        raise ValueError("record too short to fit a stationary current")
    if report is None:
        report = detect_plateaux(record, **kwargs)
    if report.intervals:
        longest = int(np.argmax(report.durations))
        return report.j0[longest], report
    lo, hi = t[0] + 0.25 * (t[-1] - t[0]), t[0] + 0.75 * (t[-1] - t[0])
    sel = (t >= lo) & (t <= hi)
    return _slope(t[sel], n_b[sel]), report
