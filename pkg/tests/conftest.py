import math

import numpy as np
import pytest

from bectrap.grid import PotentialSpec, build_grid, sample_potential


@pytest.fixture
def small_spec():
    """A short geometry that still has all three regions."""
    return PotentialSpec(L_A=20 * math.pi, L=4 * math.pi, L_B=20 * math.pi, s=0.1)


@pytest.fixture
def small_grid(small_spec):
    return build_grid(-small_spec.L_A - 4, small_spec.L + small_spec.L_B + 4, 1024)


@pytest.fixture
def periodic_grid():
    return build_grid(0.0, 2 * np.pi, 64)


def flat_potential(grid, spec=None):
    """PotentialField with v_ax = 0 everywhere (no walls)."""
    from bectrap.grid import PotentialField

    spec = spec or PotentialSpec(L_A=1.0, L=1.0, L_B=1.0)
    return PotentialField(spec, grid, np.zeros(grid.num_points))


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
