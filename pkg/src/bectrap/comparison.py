"""Simulated self-trapping compared with the q = 0 nonlinear Bloch wave.

The Bloch wave is evaluated at the reduced chemical potential of the atoms
still in reservoir A and the lattice, mu = beta (N_A + N) / L_A (the
Thomas-Fermi value of a flat box holding that fraction).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bloch import DCoefficients, bloch_density, delta_N, solve_d_system
from .observables import PlateauReport, as_series

SITE_LENGTH = np.pi


def reduced_chemical_potential(n_a, n, beta: float, L_A: float):
    """beta (N_A + N) / L_A; works elementwise."""
    if not L_A > 0:
        raise ValueError(f"L_A must be positive, got {L_A}")
    return beta * (np.asarray(n_a) + np.asarray(n)) / L_A


def site_populations(psi, L: float, start: float = 0.0) -> np.ndarray:
    """Integrated density of each lattice site [start + k pi, start + (k+1) pi)."""
    z = psi.grid.z
    rho = np.abs(psi.values) ** 2
    num_sites = int(round(L / SITE_LENGTH))
    idx = np.floor((z - start) / SITE_LENGTH).astype(int)
    inside = (idx >= 0) & (idx < num_sites)
    return np.bincount(idx[inside], weights=rho[inside], minlength=num_sites) * psi.grid.dz


def occupied_sites(populations, delta_n: float, fraction: float = 0.5) -> int:
    """Number of leading sites, counted from the lattice entrance, holding at
    least `fraction` of a full Bloch-wave site."""
    full = np.asarray(populations) >= fraction * delta_n
    return int(np.argmin(full)) if not full.all() else len(full)


@dataclass(frozen=True)
class ProfileComparison:
    time: float
    mu: float
    d: DCoefficients
    num_sites: int
    error: float  # over the occupied sites
    error_full_lattice: float
    populations: tuple


def _relative_l2(rho, ref):
    return float(np.linalg.norm(rho - ref) / np.linalg.norm(ref))


def compare_lattice_density(psi, beta: float, s: float, L: float, L_A: float,
                            n_a: float, n: float, fraction: float = 0.5) -> ProfileComparison:
    """Relative L2 distance between the simulated lattice density and the Bloch wave.

    The main figure of merit covers the localized part of the condensate
    (the occupied sites); the full-lattice value is reported alongside.
    """
    mu = float(reduced_chemical_potential(n_a, n, beta, L_A))
    d = solve_d_system(mu, beta, s)
    pops = site_populations(psi, L)
    k = occupied_sites(pops, delta_N(d), fraction)
    z = psi.grid.z
    rho = np.abs(psi.values) ** 2
    lattice = (z >= 0) & (z <= L)
    full = _relative_l2(rho[lattice], bloch_density(d, z[lattice]))
    if k == 0:
        err = float("inf")
    else:
        sel = (z >= 0) & (z < k * SITE_LENGTH)
        err = _relative_l2(rho[sel], bloch_density(d, z[sel]))
    return ProfileComparison(float(psi.time), mu, d, k, err, full, tuple(float(p) for p in pops))


@dataclass(frozen=True)
class Step:
    """Transition between two consecutive plateaux."""

    t_start: float  # end of the earlier plateau
    t_end: float  # start of the later plateau
    before: float  # mean N on the earlier plateau
    after: float
    mu: float  # reduced chemical potential at the step midpoint

    @property
    def height(self) -> float:
        return self.after - self.before

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


def plateau_levels(record, report: PlateauReport) -> list[float]:
    """Mean lattice population on every detected plateau."""
    t, _, n, _, _ = as_series(record)
    return [float(np.mean(n[(t >= a) & (t <= b)])) for a, b in report.intervals]


def plateau_steps(record, report: PlateauReport, beta: float, L_A: float) -> list[Step]:
    t, n_a, n, _, _ = as_series(record)
    levels = plateau_levels(record, report)
    steps = []
    for k in range(len(levels) - 1):
        t0, t1 = report.intervals[k][1], report.intervals[k + 1][0]
        mid = np.argmin(np.abs(t - 0.5 * (t0 + t1)))
        mu = float(reduced_chemical_potential(n_a[mid], n[mid], beta, L_A))
        steps.append(Step(t0, t1, levels[k], levels[k + 1], mu))
    return steps


def extended_plateaux(report: PlateauReport, steps: list[Step], factor: float = 10.0) -> list[tuple]:
    """Plateaux entered through an upward step and lasting more than
    `factor` times that step's duration."""
    out = []
    for k, step in enumerate(steps):
        a, b = report.intervals[k + 1]
        if step.height > 0 and (b - a) > factor * max(step.duration, 0.0):
            out.append((a, b))
    return out


def predicted_step(step: Step, beta: float, s: float) -> float:
    """Bloch-wave population of one site at the step's reduced chemical potential."""
    return delta_N(solve_d_system(step.mu, beta, s))
