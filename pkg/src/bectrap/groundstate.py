"""Ground state of the condensate in reservoir A by normalized gradient flow."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import fft

from .dynamics import NumericalError, SplitStepper, Wavefunction
from .grid import PotentialField

log = logging.getLogger(__name__)


@dataclass
class GroundStateResult:
    wavefunction: Wavefunction
    mu: float
    energy: float
    iterations: int
    residual: float
    energy_history: list = field(default_factory=list, repr=False)


class ConvergenceError(NumericalError):
    def __init__(self, message, residual, result=None):
        super().__init__(message)
        self.residual = residual
        self.result = result


def _kinetic_density_integral(values, grid):
    # 1/2 int |d_z psi|^2 dz via Parseval, consistent with the propagator
    coeffs = fft.fft(values)
    return 0.5 * float(np.sum(grid.wavenumbers**2 * np.abs(coeffs) ** 2)) * grid.dz / grid.num_points


def energy_functional(values: np.ndarray, potential: PotentialField, beta: float) -> float:
    """E = int (1/2 |psi'|^2 + v |psi|^2 + beta/2 |psi|^4) dz."""
    grid = potential.grid
    rho = np.abs(values) ** 2
    return _kinetic_density_integral(values, grid) + float(
        np.sum(potential.values * rho + 0.5 * beta * rho**2) * grid.dz
    )


def chemical_potential(psi, potential: PotentialField, beta: float, norm_tol: float = 1e-6) -> float:
    """mu = int (1/2 |psi'|^2 + v |psi|^2 + beta |psi|^4) dz for a normalized state."""
    values = psi.values if isinstance(psi, Wavefunction) else np.asarray(psi, dtype=complex)
    grid = potential.grid
    grid.check(values)
    rho = np.abs(values) ** 2
    norm = float(np.sum(rho) * grid.dz)
    if abs(norm - 1.0) > norm_tol:
        raise ValueError(f"state is not normalized (norm = {norm:.10g})")
    return _kinetic_density_integral(values, grid) + float(
        np.sum(potential.values * rho + beta * rho**2) * grid.dz
    )


def reservoir_mask(potential: PotentialField) -> np.ndarray:
    """Grid points on the reservoir-A side of the shutter."""
    return potential.grid.z < 0.5 * potential.spec.wall_width


def initial_guess(potential: PotentialField, beta: float) -> np.ndarray:
    """Thomas-Fermi profile in reservoir A, or the lowest box mode when beta = 0."""
    spec = potential.spec
    z = potential.grid.z
    inside = (z >= -spec.L_A) & (z < 0)
    if beta > 0:
        mu_tf = beta / spec.L_A
        guess = np.sqrt(np.clip(mu_tf - potential.values, 0.0, None) / beta) * inside
    else:
        guess = np.sin(np.pi * (z + spec.L_A) / spec.L_A) * inside
    guess = guess.astype(complex)
    norm = np.sqrt(np.sum(np.abs(guess) ** 2) * potential.grid.dz)
    return guess / norm


def normalized_gradient_flow(
    potential: PotentialField,
    beta: float,
    dt_imag: float = 1e-2,
    tol: float = 1e-10,
    max_iter: int = 1_000_000,
    initial=None,
    energy_every: int = 0,
) -> GroundStateResult:
    """Imaginary-time Strang splitting with renormalization after every step.

    The state is projected onto reservoir A after each step; otherwise the
    flow would slowly tunnel through the shutter into the (larger, lower
    energy) lattice/B side.  Converged when the sup-norm change per unit
    imaginary time drops below `tol`.
    """
    if beta < 0:
        raise ValueError(f"beta must be non-negative, got {beta}")
    if not potential.spec.shutter_closed:
        raise ValueError("ground state must be prepared with the shutter closed")
    grid = potential.grid
    stepper = SplitStepper(potential, beta, dt_imag, imaginary=True)
    mask = reservoir_mask(potential)
    psi = initial_guess(potential, beta) if initial is None else np.asarray(initial, dtype=complex).copy()
    psi = psi * mask
    psi /= np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dz)

    history = []
    residual = np.inf
    it = 0
    for it in range(1, int(max_iter) + 1):
        new = stepper.step(psi) * mask
        new /= np.sqrt(np.sum(np.abs(new) ** 2) * grid.dz)
        residual = float(np.max(np.abs(new - psi))) / dt_imag
        psi = new
        if energy_every and it % energy_every == 0:
            history.append(energy_functional(psi, potential, beta))
        if not np.isfinite(residual):
            raise NumericalError(f"gradient flow produced non-finite values at iteration {it}")
        if residual < tol:
            break

    # fix the global phase so the state is real and positive at its peak
    peak = np.argmax(np.abs(psi))
    psi = psi * np.exp(-1j * np.angle(psi[peak]))
    state = Wavefunction(grid, psi, 0.0)
    result = GroundStateResult(
        wavefunction=state,
        mu=chemical_potential(state, potential, beta),
        energy=energy_functional(psi, potential, beta),
        iterations=it,
        residual=residual,
        energy_history=history,
    )
    if residual >= tol:
        raise ConvergenceError(
            f"gradient flow did not converge in {max_iter} iterations (residual {residual:.3e})",
            residual, result,
        )
    log.info("ground state: mu=%.6f after %d iterations", result.mu, it)
    return result
