"""Spatial domain, lattice potential and unit conversion.

Lengths are measured in units of 1/k (k the lattice wave number), energies in
recoil energies E_R and times in hbar/(2 E_R).  The transform-based solvers
treat the whole grid as periodic, so the hard box edges of reservoirs A and B
are realised as steep tanh walls.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import constants

MIN_POINTS = 16


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on [z_min, z_max)."""

    z_min: float
    z_max: float
    num_points: int

    def __post_init__(self):
        if not self.z_max > self.z_min:
            raise ValueError(f"grid extent must be positive, got [{self.z_min}, {self.z_max}]")
        if self.num_points < MIN_POINTS:
            raise ValueError(f"need at least {MIN_POINTS} grid points, got {self.num_points}")

    @property
    def length(self) -> float:
        return self.z_max - self.z_min

    @property
    def dz(self) -> float:
        return self.length / self.num_points

    @property
    def z(self) -> np.ndarray:
        return self.z_min + self.dz * np.arange(self.num_points)

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.num_points, d=self.dz)

    def check(self, values: np.ndarray) -> None:
        if np.shape(values) != (self.num_points,):
            raise ValueError(
                f"field of shape {np.shape(values)} does not match grid of {self.num_points} points"
            )


def build_grid(z_min: float, z_max: float, num_points: int) -> Grid:
    """Grid with a power-of-two number of points."""
    num_points = int(num_points)
    if num_points <= 0 or num_points & (num_points - 1):
        raise ValueError(f"num_points must be a positive power of two, got {num_points}")
    return Grid(float(z_min), float(z_max), num_points)


def points_for_resolution(extent: float, points_per_period: int) -> int:
    """Smallest power of two giving at least `points_per_period` samples per lattice period pi."""
    needed = extent / (np.pi / points_per_period)
    return max(MIN_POINTS, 1 << int(np.ceil(np.log2(needed))))


@dataclass(frozen=True)
class PotentialSpec:
    """Reservoir A on [-L_A, 0), lattice on [0, L], reservoir B on (L, L + L_B]."""

    L_A: float
    L: float
    L_B: float
    s: float = 0.0
    v: float = 0.0
    wall_height: float = 500.0
    wall_width: float = 2.0
    shutter_closed: bool = False

    def __post_init__(self):
        if min(self.L_A, self.L, self.L_B) <= 0:
            raise ValueError("region lengths L_A, L, L_B must be positive")
        if self.s < 0:
            raise ValueError(f"lattice depth s must be non-negative, got {self.s}")
        if self.wall_height <= 0 or self.wall_width <= 0:
            raise ValueError("wall height and width must be positive")

    @property
    def num_sites(self) -> float:
        return self.L / np.pi

    @property
    def z_left(self) -> float:
        return -self.L_A

    @property
    def z_right(self) -> float:
        return self.L + self.L_B

    def with_shutter(self, closed: bool) -> "PotentialSpec":
        return replace(self, shutter_closed=closed)


@dataclass(frozen=True)
class PotentialField:
    spec: PotentialSpec
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values.setflags(write=False)


def _ramp(x):
    # 0.5 (1 + tanh x); saturates to exactly 0 and 1 in floating point
    return 0.5 * (1.0 + np.tanh(x))


def sample_potential(spec: PotentialSpec, grid: Grid) -> PotentialField:
    """Sample the piecewise potential (walls, reservoirs, lattice, optional shutter)."""
    w = spec.wall_width
    if grid.z_min > spec.z_left - w or grid.z_max < spec.z_right + w:
        raise ValueError(
            f"grid [{grid.z_min:.4g}, {grid.z_max:.4g}) does not cover the geometry "
            f"[{spec.z_left - w:.4g}, {spec.z_right + w:.4g}] including walls"
        )
    z = grid.z
    # ramp centred half a wall width outside each edge, width w/12 so the
    # wall is below 1e-5 * wall_height at the reservoir edge
    steep = w / 12.0
    values = spec.wall_height * (
        _ramp((spec.z_left - 0.5 * w - z) / steep) + _ramp((z - spec.z_right - 0.5 * w) / steep)
    )
    lattice = (z >= 0.0) & (z <= spec.L)
    values[lattice] = spec.v + spec.s * np.cos(2.0 * z[lattice])
    if spec.shutter_closed:
        values = values + spec.wall_height * (_ramp(z / steep) - _ramp((z - w) / steep))
    return PotentialField(spec, grid, values)


def spectral_gradient(field: np.ndarray, grid: Grid) -> np.ndarray:
    """d/dz by Fourier differentiation."""
    grid.check(field)
    ik = 1j * grid.wavenumbers
    ik[grid.num_points // 2] = 0.0  # Nyquist mode has no well-defined first derivative
    out = np.fft.ifft(ik * np.fft.fft(field))
    return out.real if np.isrealobj(field) else out


@dataclass(frozen=True)
class PhysicalUnits:
    """Laboratory parameters of the quasi-1D condensate (SI units)."""

    atom_mass: float
    s_wave_length: float
    transverse_freq: float
    atom_number: float
    laser_wavenumber: float

    def __post_init__(self):
        for name in ("atom_mass", "s_wave_length", "transverse_freq", "atom_number", "laser_wavenumber"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive, got {getattr(self, name)}")

    @property
    def recoil_energy(self) -> float:
        return constants.hbar**2 * self.laser_wavenumber**2 / (2 * self.atom_mass)

    @property
    def coupling(self) -> float:
        """3D contact coupling g = 4 pi hbar^2 a_s / m."""
        return 4 * np.pi * constants.hbar**2 * self.s_wave_length / self.atom_mass

    @property
    def beta(self) -> float:
        return (
            self.atom_number * self.s_wave_length * self.laser_wavenumber
            * constants.hbar * self.transverse_freq / self.recoil_energy
        )

    @property
    def time_unit(self) -> float:
        """Seconds per unit of dimensionless time."""
        return constants.hbar / (2 * self.recoil_energy)

    @property
    def length_unit(self) -> float:
        return 1.0 / self.laser_wavenumber


def to_dimensionless(units: PhysicalUnits, time=None, length=None, energy=None) -> dict:
    """Convert SI times (s), lengths (m) and energies (J); returns those given plus beta."""
    out = {"beta": units.beta}
    if time is not None:
        out["time"] = np.asarray(time) / units.time_unit
    if length is not None:
        out["length"] = np.asarray(length) / units.length_unit
    if energy is not None:
        out["energy"] = np.asarray(energy) / units.recoil_energy
    return out


def to_physical(units: PhysicalUnits, time=None, length=None, energy=None) -> dict:
    out = {}
    if time is not None:
        out["time"] = np.asarray(time) * units.time_unit
    if length is not None:
        out["length"] = np.asarray(length) * units.length_unit
    if energy is not None:
        out["energy"] = np.asarray(energy) * units.recoil_energy
    return out
