"""Second-order Strang-split Fourier propagator for the 1D GPE

    i d/dt psi = [-1/2 d^2/dz^2 + v_ax(z) + beta |psi|^2] psi

The same stepper runs in imaginary time for ground-state preparation.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import fft

from .grid import Grid, PotentialField

log = logging.getLogger(__name__)

DEFAULT_DT = 5e-3


@dataclass
class Wavefunction:
    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        self.grid.check(self.values)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def norm(self) -> float:
        return float(np.sum(self.density) * self.grid.dz)

    def copy(self) -> "Wavefunction":
        return Wavefunction(self.grid, self.values.copy(), self.time)


@dataclass(frozen=True)
class EvolutionPlan:
    dt: float = DEFAULT_DT
    t_end: float = 0.0
    snapshot_times: tuple = ()
    observer_stride: int = 200

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_end < 0 or (self.t_end > 0 and self.dt > self.t_end):
            raise ValueError(f"need 0 < dt <= t_end, got dt={self.dt}, t_end={self.t_end}")
        times = tuple(float(t) for t in self.snapshot_times)
        if list(times) != sorted(times):
            raise ValueError("snapshot_times must be sorted")
        if times and (times[0] < 0 or times[-1] > self.t_end):
            raise ValueError("snapshot_times must lie within [0, t_end]")
        if self.observer_stride < 1:
            raise ValueError("observer_stride must be >= 1")
        object.__setattr__(self, "snapshot_times", times)

    @property
    def num_steps(self) -> int:
        return int(round(self.t_end / self.dt))


class NumericalError(RuntimeError):
    """Raised when the state becomes non-finite or a solver fails to converge."""


class SplitStepper:
    """Strang splitting with precomputed phase factors.

    `imaginary=True` propagates in imaginary time (t -> -i t); the caller
    is responsible for renormalising.
    """

    def __init__(self, potential: PotentialField, beta: float, dt: float, imaginary: bool = False):
        if dt == 0:
            raise ValueError("dt must be non-zero")
        self.grid = potential.grid
        self.potential = potential.values
        self.beta = float(beta)
        self.dt = float(dt)
        self.imaginary = imaginary
        # factor multiplying the generator: exp(-i dt H) or exp(-dt H)
        self._c = -self.dt if imaginary else -1j * self.dt
        self._kinetic = np.exp(self._c * 0.5 * self.grid.wavenumbers**2)

    def _half_potential(self, psi):
        return psi * np.exp(0.5 * self._c * (self.potential + self.beta * (psi.real**2 + psi.imag**2)))

    def step(self, psi: np.ndarray) -> np.ndarray:
        psi = self._half_potential(psi)
        psi = fft.ifft(self._kinetic * fft.fft(psi))
        return self._half_potential(psi)

    def advance(self, psi: np.ndarray, num_steps: int) -> np.ndarray:
        for _ in range(num_steps):
            psi = self.step(psi)
        return psi


def _check_grid(psi: Wavefunction, potential: PotentialField):
    if psi.grid != potential.grid:
        raise ValueError("wavefunction and potential are sampled on different grids")


def strang_step(psi: Wavefunction, potential: PotentialField, beta: float, dt: float) -> Wavefunction:
    """One real-time step; a negative dt steps backwards."""
    _check_grid(psi, potential)
    if dt == 0:
        raise ValueError("dt must be non-zero")
    out = SplitStepper(potential, beta, dt).step(psi.values)
    if not np.all(np.isfinite(out)):
        raise NumericalError(f"non-finite wavefunction after step at t={psi.time + dt:.6g}")
    return Wavefunction(psi.grid, out, psi.time + dt)


Observer = Callable[[float, float, float, float, np.ndarray], None]


def evolve(
    psi: Wavefunction,
    potential: PotentialField,
    beta: float,
    plan: EvolutionPlan,
    observers: Sequence[Observer] = (),
    partition=None,
    probes: Sequence[float] | None = None,
    snapshot_dir: str | Path | None = None,
    populations: str = "spectral",
):
    """Propagate to plan.t_end and return a TrajectoryRecord.

    Samples (region numbers, probe currents) are taken every
    `observer_stride` steps and at the final step.  Snapshots go to the step
    nearest each requested time; they are written to `snapshot_dir` if given,
    otherwise kept in memory on the record.  `populations` selects the
    region-number quadrature (see observables.region_numbers).
    """
    from . import observables
    from .io import write_snapshot

    _check_grid(psi, potential)
    if populations not in ("grid", "spectral"):
        raise ValueError(f"unknown population method {populations!r}")
    spec = potential.spec
    if partition is None:
        partition = observables.RegionPartition.from_spec(spec)
    if probes is None:
        probes = (0.0, spec.L)
    probes = np.asarray(probes, dtype=float)

    record = observables.TrajectoryRecord(probe_positions=probes)
    stepper = SplitStepper(potential, beta, plan.dt)
    n_steps = plan.num_steps
    snap_steps = [min(int(round(t / plan.dt)), n_steps) for t in plan.snapshot_times]
    snap_index = 0
    values = psi.values.copy()
    t0 = psi.time

    def sample(step):
        t = t0 + step * plan.dt
        state = Wavefunction(psi.grid, values, t)
        n_a, n_l, n_b = observables.region_numbers(state, partition, populations)
        currents = observables.current_at(state, probes)
        record.append(t, n_a, n_l, n_b, currents)
        for obs in observers:
            obs(t, n_a, n_l, n_b, currents)

    def snapshot(step, requested):
        t = t0 + step * plan.dt
        state = Wavefunction(psi.grid, values.copy(), t)
        if snapshot_dir is None:
            record.snapshots.append(observables.SnapshotEntry(requested, t, None, state))
            return
        path = Path(snapshot_dir) / f"snapshot_{len(record.snapshots):04d}_t{t:.3f}.bin"
        try:
            write_snapshot(path, state, beta)
        except OSError as exc:
            raise OSError(f"writing snapshot at t={t:.6g} failed: {exc}") from exc
        record.snapshots.append(observables.SnapshotEntry(requested, t, str(path), None))

    for step in range(n_steps + 1):
        while snap_index < len(snap_steps) and snap_steps[snap_index] == step:
            snapshot(step, plan.snapshot_times[snap_index])
            snap_index += 1
        if step % plan.observer_stride == 0 or step == n_steps:
            if not np.all(np.isfinite(values)):
                raise NumericalError(f"non-finite wavefunction at t={t0 + step * plan.dt:.6g}")
            sample(step)
        if step < n_steps:
            values = stepper.step(values)

    record.final_state = Wavefunction(psi.grid, values, t0 + n_steps * plan.dt)
    return record
