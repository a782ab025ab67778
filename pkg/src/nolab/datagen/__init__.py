"""PDE data generation: wave, Navier-Stokes, Darcy, Allen-Cahn."""

from .allen_cahn import AC_EPS, AC_GRID, AC_T, allen_cahn_solve, stable_dt
from .darcy import (
    ConvergenceError,
    darcy_residual,
    darcy_sample_coefficient,
    darcy_solve,
    manufactured_source,
)
from .dataset import FAMILIES, build_dataset, canonical_family, data_card, normalize, denormalize
from .field import BOUNDARY_KINDS, Field2D, grid_coords, grid_spacing
from .grf import DARCY_GRF, NS_GRF, GRFSpec, sample_grf
from .navier_stokes import CFLError, enstrophy, ns_forcing, ns_solve
from .wave import WAVE_K, WAVE_SPEED, SineCoeffs, project_sine, sample_wave_initial, wave_at, wave_exact_solution

__all__ = [name for name in dir() if not name.startswith("_")]
