import numpy as np
import pytest

from bectrap.bloch import bloch_density, delta_N, solve_d_system
from bectrap.comparison import (
    Step, compare_lattice_density, extended_plateaux, occupied_sites, plateau_levels, plateau_steps,
    predicted_step, reduced_chemical_potential, site_populations,
)
from bectrap.dynamics import Wavefunction
from bectrap.grid import build_grid
from bectrap.observables import PlateauReport, detect_plateaux

BETA, S, L_A, L = 397.89, 0.127, 160 * np.pi, 10 * np.pi


def test_reduced_chemical_potential():
    assert reduced_chemical_potential(0.9, 0.1, BETA, L_A) == pytest.approx(BETA / L_A)
    assert np.allclose(reduced_chemical_potential([0.5, 0.4], [0.0, 0.1], 2.0, 1.0), [1.0, 1.0])
    with pytest.raises(ValueError):
        reduced_chemical_potential(1, 0, 1.0, 0.0)


def _lattice_state(d, filled, dz_points=4096):
    grid = build_grid(-10.0, L + 10.0, dz_points)
    z = grid.z
    amp = np.where((z >= 0) & (z < filled * np.pi), d.d0 + d.d1 * np.cos(2 * z), 0.0)
    return Wavefunction(grid, amp.astype(complex), 700.0)


def test_site_populations_and_occupancy():
    d = solve_d_system(0.7, BETA, S)
    psi = _lattice_state(d, 4)
    pops = site_populations(psi, L)
    assert len(pops) == 10
    assert np.allclose(pops[:4], delta_N(d), rtol=5e-3)  # site edges fall between samples
    assert np.all(pops[4:] == 0)
    assert occupied_sites(pops, delta_N(d)) == 4
    assert occupied_sites(np.full(10, 1.0), 1.0) == 10
    assert occupied_sites(np.zeros(10), 1.0) == 0


def test_compare_exact_bloch_profile():
    n_a, n = 0.85, 0.03
    mu = BETA * (n_a + n) / L_A
    d = solve_d_system(mu, BETA, S)
    comp = compare_lattice_density(_lattice_state(d, 5), BETA, S, L, L_A, n_a, n)
    assert comp.mu == pytest.approx(mu)
    assert comp.num_sites == 5
    assert comp.error < 1e-12
    assert comp.error_full_lattice > 0.5  # half the lattice is empty
    scaled = _lattice_state(d, 5)
    scaled.values *= np.sqrt(1.1)
    assert compare_lattice_density(scaled, BETA, S, L, L_A, n_a, n).error == pytest.approx(0.1, rel=1e-6)


def test_compare_empty_lattice():
    d = solve_d_system(0.7, BETA, S)
    comp = compare_lattice_density(_lattice_state(d, 0), BETA, S, L, L_A, 0.9, 0.0)
    assert comp.num_sites == 0 and comp.error == np.inf


def _staircase_record():
    t = np.arange(0.0, 1200.0)
    n = np.full_like(t, 0.02)
    for t_e in (200.0, 400.0):
        n += 0.005 * np.clip((t - t_e) / 25.0, 0, 1)
    n_b = 2e-4 * t
    return dict(times=t, N_A=1 - n - n_b, N=n, N_B=n_b)


def test_plateau_steps_and_extended_plateaux():
    rec = _staircase_record()
    rep = detect_plateaux(rec, window=20, threshold=1e-5)
    assert len(rep) == 3
    levels = plateau_levels(rec, rep)
    assert np.allclose(levels, [0.02, 0.025, 0.03], atol=2e-4)
    steps = plateau_steps(rec, rep, BETA, L_A)
    assert [st.height for st in steps] == pytest.approx([0.005, 0.005], abs=3e-4)
    assert all(20 <= st.duration <= 40 for st in steps)
    # plateau 2 lasts ~170 (< 10 x step), plateau 3 ~790
    assert extended_plateaux(rep, steps) == [rep.intervals[2]]
    mid = 0.5 * (steps[0].t_start + steps[0].t_end)
    assert steps[0].mu == pytest.approx(BETA * (1 - 2e-4 * mid) / L_A, rel=1e-3)


def test_downward_step_is_not_a_staircase():
    rep = PlateauReport(intervals=[(0.0, 100.0), (110.0, 900.0)])
    step = Step(100.0, 110.0, 0.03, 0.02, 0.6)
    assert step.height < 0
    assert extended_plateaux(rep, [step]) == []


def test_predicted_step():
    step = Step(0.0, 1.0, 0.0, 0.0, 0.7)
    assert predicted_step(step, BETA, S) == pytest.approx(np.pi * solve_d_system(0.7, BETA, S).n)
