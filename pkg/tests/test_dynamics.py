import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bectrap.dynamics import (
    EvolutionPlan, NumericalError, SplitStepper, Wavefunction, evolve, strang_step,
)
from bectrap.groundstate import energy_functional
from bectrap.grid import PotentialField, PotentialSpec, build_grid, sample_potential

SPEC = PotentialSpec(L_A=1.0, L=1.0, L_B=1.0)


def field_on(grid, values):
    return PotentialField(SPEC, grid, np.asarray(values, dtype=float))


def gaussian_exact(z, t, sigma, k0):
    """Free Schrodinger evolution of a normalized Gaussian packet."""
    a = sigma**2 + 0.5j * t
    pref = (2 * np.pi * sigma**2) ** -0.25 * np.sqrt(sigma**2 / a)
    return pref * np.exp(-(z - k0 * t) ** 2 / (4 * a) + 1j * k0 * z - 0.5j * k0**2 * t)


def test_free_gaussian_dispersion():
    grid = build_grid(-60, 60, 1024)
    z = grid.z
    psi = Wavefunction(grid, gaussian_exact(z, 0.0, 1.5, 1.0))
    pot = field_on(grid, np.zeros_like(z))
    rec = evolve(psi, pot, 0.0, EvolutionPlan(dt=0.01, t_end=10.0, observer_stride=500),
                 partition=None, probes=[0.0])
    assert np.max(np.abs(rec.final_state.values - gaussian_exact(z, 10.0, 1.5, 1.0))) < 1e-10
    width = np.sqrt(np.sum((z - 10.0) ** 2 * rec.final_state.density) * grid.dz)
    assert width == pytest.approx(1.5 * np.sqrt(1 + (10 / (2 * 1.5**2)) ** 2), rel=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(-6, 6), st.floats(0.1, 2.0), st.floats(0, 50), st.floats(-1, 1))
def test_uniform_plane_wave_phase(m, amp, beta, v0):
    grid = build_grid(0, 2 * np.pi, 32)
    psi0 = amp * np.exp(1j * m * grid.z)
    stepper = SplitStepper(field_on(grid, np.full(32, v0)), beta, 0.01)
    out = stepper.advance(psi0, 100)
    exact = psi0 * np.exp(-1j * (0.5 * m**2 + v0 + beta * amp**2) * 1.0)
    assert np.max(np.abs(out - exact)) < 1e-10 * max(1.0, amp * beta)


def _smooth_problem():
    grid = build_grid(-16, 16, 256)
    z = grid.z
    pot = field_on(grid, 0.5 * 0.1 * z**2 + 0.3 * np.cos(z))
    psi0 = np.exp(-((z - 1) ** 2) / 2 + 0.5j * z).astype(complex)
    psi0 /= np.sqrt(np.sum(np.abs(psi0) ** 2) * grid.dz)
    return grid, pot, psi0


def test_unitarity_over_many_steps():
    grid, pot, psi0 = _smooth_problem()
    out = SplitStepper(pot, 10.0, 5e-3).advance(psi0, 100_000)
    drift = abs(np.sum(np.abs(out) ** 2) * grid.dz - 1.0)
    assert drift < 1e-10


def convergence_order(beta=5.0, t_end=1.0):
    grid, pot, psi0 = _smooth_problem()
    ref = SplitStepper(pot, beta, t_end / 2048).advance(psi0, 2048)
    errs = []
    steps = [16, 32, 64, 128]
    for n in steps:
        out = SplitStepper(pot, beta, t_end / n).advance(psi0, n)
        errs.append(np.sqrt(np.sum(np.abs(out - ref) ** 2) * grid.dz))
    slopes = -np.diff(np.log(errs)) / np.diff(np.log(steps))
    return float(np.mean(slopes)), errs


def test_second_order_convergence():
    order, errs = convergence_order()
    assert order == pytest.approx(2.0, abs=0.2)
    assert errs[-1] < 1e-3


def test_time_reversal():
    grid, pot, psi0 = _smooth_problem()
    fwd = SplitStepper(pot, 20.0, 0.01).advance(psi0, 500)
    back = SplitStepper(pot, 20.0, -0.01).advance(fwd, 500)
    assert np.max(np.abs(back - psi0)) < 1e-10


def test_energy_conservation():
    grid, pot, psi0 = _smooth_problem()
    e0 = energy_functional(psi0, pot, 10.0)
    energies = []
    stepper = SplitStepper(pot, 10.0, 1e-3)
    psi = psi0
    for _ in range(20):
        psi = stepper.advance(psi, 250)
        energies.append(energy_functional(psi, pot, 10.0))
    assert np.max(np.abs(np.array(energies) - e0)) < 1e-5 * abs(e0)


def test_strang_step_matches_stepper_and_time():
    grid, pot, psi0 = _smooth_problem()
    psi = Wavefunction(grid, psi0, 2.0)
    out = strang_step(psi, pot, 3.0, 0.01)
    assert out.time == pytest.approx(2.01)
    assert np.array_equal(out.values, SplitStepper(pot, 3.0, 0.01).step(psi0))


def test_strang_step_errors():
    grid, pot, psi0 = _smooth_problem()
    other = build_grid(-16, 16, 128)
    with pytest.raises(ValueError):
        strang_step(Wavefunction(other, np.ones(128)), pot, 1.0, 0.01)
    with pytest.raises(ValueError):
        strang_step(Wavefunction(grid, psi0), pot, 1.0, 0.0)
    bad = psi0.copy()
    bad[3] = np.nan
    with pytest.raises(NumericalError):
        strang_step(Wavefunction(grid, bad), pot, 1.0, 0.01)


@pytest.mark.parametrize("kw", [dict(dt=0), dict(dt=1, t_end=0.5), dict(t_end=-1),
                                dict(t_end=1, snapshot_times=(0.5, 0.2)),
                                dict(t_end=1, snapshot_times=(2,)), dict(observer_stride=0)])
def test_plan_validation(kw):
    with pytest.raises(ValueError):
        EvolutionPlan(**kw)


def test_evolve_sampling_observers_and_snapshots():
    spec = PotentialSpec(L_A=4 * np.pi, L=2 * np.pi, L_B=4 * np.pi, s=0.1)
    grid = build_grid(-spec.L_A - 4, spec.L + spec.L_B + 4, 512)
    pot = sample_potential(spec, grid)
    z = grid.z
    psi0 = np.exp(-((z + 5) ** 2)).astype(complex)
    psi0 /= np.sqrt(np.sum(np.abs(psi0) ** 2) * grid.dz)
    seen = []
    plan = EvolutionPlan(dt=0.01, t_end=1.01, snapshot_times=(0.0, 0.5, 0.5, 1.004), observer_stride=25)
    rec = evolve(Wavefunction(grid, psi0), pot, 5.0, plan, observers=[lambda *a: seen.append(a)])
    # every 25 steps plus the final step (101 steps in total)
    assert rec.times == pytest.approx([0.0, 0.25, 0.5, 0.75, 1.0, 1.01])
    assert len(seen) == len(rec)
    assert seen[0][0] == 0.0 and np.allclose(seen[-1][4], rec.probe_currents[-1])
    assert [s.time for s in rec.snapshots] == pytest.approx([0.0, 0.5, 0.5, 1.0])
    assert [s.requested_time for s in rec.snapshots] == [0.0, 0.5, 0.5, 1.004]
    assert np.array_equal(rec.snapshots[0].state.values, psi0)
    totals = np.array(rec.N_A) + np.array(rec.N) + np.array(rec.N_B)
    assert np.allclose(totals, 1.0, atol=1e-12)
    assert rec.final_state.time == pytest.approx(1.01)


def test_evolve_writes_snapshot_files(tmp_path):
    from bectrap.io import read_snapshot

    grid, pot, psi0 = _smooth_problem()
    pot = sample_potential(PotentialSpec(L_A=4, L=2, L_B=4), grid)
    plan = EvolutionPlan(dt=0.01, t_end=0.1, snapshot_times=(0.05,), observer_stride=5)
    rec = evolve(Wavefunction(grid, psi0), pot, 1.0, plan, snapshot_dir=tmp_path)
    state, beta = read_snapshot(rec.snapshots[0].path)
    assert beta == 1.0 and state.time == pytest.approx(0.05)


def test_evolve_snapshot_failure_names_time(tmp_path):
    grid, pot, psi0 = _smooth_problem()
    pot = sample_potential(PotentialSpec(L_A=4, L=2, L_B=4), grid)
    blocker = tmp_path / "file"
    blocker.write_text("x")
    plan = EvolutionPlan(dt=0.01, t_end=0.1, snapshot_times=(0.05,), observer_stride=5)
    with pytest.raises(OSError, match="t=0.05"):
        evolve(Wavefunction(grid, psi0), pot, 1.0, plan, snapshot_dir=blocker / "sub")


def test_evolve_detects_blow_up():
    grid, pot, psi0 = _smooth_problem()
    pot = sample_potential(PotentialSpec(L_A=4, L=2, L_B=4), grid)
    bad = psi0.copy()
    bad[0] = np.inf
    with pytest.raises(NumericalError):
        evolve(Wavefunction(grid, bad), pot, 1.0, EvolutionPlan(dt=0.01, t_end=0.1))
