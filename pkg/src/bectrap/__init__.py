"""Transport and self-trapping of a quasi-1D condensate expanding through a shallow optical lattice."""

from .grid import Grid, PhysicalUnits, PotentialField, PotentialSpec, build_grid, sample_potential, spectral_gradient
from .dynamics import EvolutionPlan, SplitStepper, Wavefunction, evolve, strang_step
from .groundstate import GroundStateResult, chemical_potential, normalized_gradient_flow
from .observables import (
    PlateauReport, RegionPartition, TrajectoryRecord, current_field, detect_plateaux,
    region_numbers, speed_of_sound, stationary_current,
)

__version__ = "0.1.0"
