import numpy as np
import pytest
from scipy import linalg

from bectrap.dynamics import Wavefunction
from bectrap.groundstate import (
    ConvergenceError, chemical_potential, energy_functional, initial_guess,
    normalized_gradient_flow, reservoir_mask,
)
from bectrap.grid import PotentialSpec, build_grid, sample_potential


def _setup(n=512, L_A=6 * np.pi):
    spec = PotentialSpec(L_A=L_A, L=2 * np.pi, L_B=4 * np.pi, s=0.1, shutter_closed=True)
    grid = build_grid(-spec.L_A - 4, spec.L + spec.L_B + 4, n)
    return spec, grid, sample_potential(spec, grid)


def spectral_hamiltonian(grid, values):
    """Dense Fourier-collocation Hamiltonian -1/2 d^2 + v."""
    n = grid.num_points
    f = np.fft.fft(np.eye(n), axis=0)
    kin = np.fft.ifft(0.5 * grid.wavenumbers[:, None] ** 2 * f, axis=0).real
    return kin + np.diag(values)


def test_linear_ground_state_against_dense_eigensolver():
    spec, grid, pot = _setup(256, L_A=4 * np.pi)
    res = normalized_gradient_flow(pot, 0.0, dt_imag=2e-3, tol=1e-9)
    mask = reservoir_mask(pot)
    h = spectral_hamiltonian(grid, pot.values)[np.ix_(mask, mask)]
    e0 = linalg.eigh(h, eigvals_only=True, subset_by_index=[0, 0])[0]
    # Strang fixed point differs from the eigenstate at O(dt^2)
    assert res.mu == pytest.approx(e0, rel=1e-5)
    # close to the hard-wall box value (pi / L_eff)^2 / 2
    assert res.mu == pytest.approx(0.5 * (np.pi / spec.L_A) ** 2, rel=0.1)


def test_stationarity_residual_with_interaction():
    # the Strang fixed point solves H psi = mu psi up to O(dt^2), the error
    # sitting at the steep shutter edge
    spec, grid, pot = _setup()
    beta = 30.0
    resids = []
    for dt in (1e-2, 5e-3, 2.5e-3):
        res = normalized_gradient_flow(pot, beta, dt_imag=dt, tol=1e-9)
        psi = res.wavefunction.values
        h_psi = spectral_hamiltonian(grid, pot.values + beta * np.abs(psi) ** 2) @ psi
        resids.append(np.sqrt(np.sum(np.abs(h_psi - res.mu * psi) ** 2) * grid.dz))
    rates = np.log2(np.array(resids[:-1]) / np.array(resids[1:]))
    assert np.all(np.abs(rates - 2) < 0.2)
    assert resids[-1] < 1e-3 * res.mu
    assert res.mu == pytest.approx(beta / spec.L_A, rel=0.1)


def test_ground_state_properties():
    spec, grid, pot = _setup()
    res = normalized_gradient_flow(pot, 20.0, energy_every=10)
    psi = res.wavefunction
    assert psi.norm() == pytest.approx(1.0, abs=1e-12)
    assert np.all(psi.values[~reservoir_mask(pot)] == 0)
    peak = np.argmax(np.abs(psi.values))
    assert abs(psi.values[peak].imag) < 1e-20 and psi.values[peak].real > 0
    assert np.max(np.abs(psi.values.imag)) < 1e-10
    hist = np.array(res.energy_history)
    # the split flow is energy diminishing up to O(dt^2) effects near the fixed point
    assert np.all(np.diff(hist) <= 1e-9 * abs(hist[0]))
    assert hist[-1] < hist[0]
    assert res.energy == pytest.approx(energy_functional(psi.values, pot, 20.0))
    assert res.residual < 1e-10 and res.iterations > 1


def test_chemical_potential_of_box_mode():
    # uniform state in a flat periodic box: mu = beta / length
    grid = build_grid(0, 10, 64)
    spec, _, _ = _setup()
    from bectrap.grid import PotentialField

    pot = PotentialField(spec, grid, np.zeros(64))
    psi = np.full(64, 1 / np.sqrt(10), dtype=complex)
    assert chemical_potential(psi, pot, 3.0) == pytest.approx(0.3, abs=1e-14)
    assert energy_functional(psi, pot, 3.0) == pytest.approx(0.15, abs=1e-14)
    with pytest.raises(ValueError, match="normalized"):
        chemical_potential(2 * psi, pot, 3.0)


def test_initial_guess_normalized_and_confined():
    spec, grid, pot = _setup()
    for beta in (0.0, 50.0):
        g = initial_guess(pot, beta)
        assert np.sum(np.abs(g) ** 2) * grid.dz == pytest.approx(1.0)
        assert np.all(g[grid.z >= 0] == 0)


def test_rejects_open_shutter_and_negative_beta():
    spec, grid, pot = _setup()
    open_pot = sample_potential(spec.with_shutter(False), grid)
    with pytest.raises(ValueError, match="shutter"):
        normalized_gradient_flow(open_pot, 1.0)
    with pytest.raises(ValueError):
        normalized_gradient_flow(pot, -1.0)


def test_convergence_error_carries_result():
    spec, grid, pot = _setup()
    with pytest.raises(ConvergenceError) as info:
        normalized_gradient_flow(pot, 10.0, max_iter=3)
    assert info.value.residual > 0
    assert isinstance(info.value.result.wavefunction, Wavefunction)


def test_initial_state_accepted():
    spec, grid, pot = _setup()
    first = normalized_gradient_flow(pot, 10.0)
    again = normalized_gradient_flow(pot, 10.0, initial=first.wavefunction.values)
    assert again.iterations < 5
    assert again.mu == pytest.approx(first.mu, rel=1e-10)
