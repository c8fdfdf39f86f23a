"""Predictor-corrector computation of surface effects in a semi-infinite EAM chain.

The Cauchy-Born predictor solves the bulk continuum problem with the external
force, and a corrector supported on a boundary layer of ``L`` bonds repairs
the surface.  The atomistic chain serves as the reference.
"""

__version__ = "0.1.0"

from .atomistic import (
    DEFAULT_N,
    DecayFit,
    Displacement,
    Tridiagonal,
    decay_lambda,
    decay_roots,
    fit_decay,
    ground_state,
    solve_atomistic,
)
from .cauchy_born import (
    ErrorBudget,
    SemiAnalyticCB,
    error_budget,
    inverse_dW,
    invertibility_window,
    project_pi_a,
    solve_cb,
    solve_cb_semianalytic,
    surface_strain_F0,
)
from .corrector import CorrectorState, solve_corrector, sweep_layers, truncate_pi_L
from .errors import DomainError, FitError, SolverError, StabilityError, StallError
from .experiments import (
    assemble_pc,
    layer_width_rule,
    run_converge_L,
    run_fixed_force,
    run_ground_state,
    run_long_wavelength,
    run_potential_check,
    strain_error,
)
from .forces import ExternalForce, build_force, read_force_csv, rescale, test2_profile, write_force_csv
from .optimize import SolverConfig, SolveReport, minimize
from .potentials import COPPER, EAMPotential, PotentialParams

__all__ = [
    "__version__",
    "DEFAULT_N",
    "DecayFit",
    "Displacement",
    "Tridiagonal",
    "decay_lambda",
    "decay_roots",
    "fit_decay",
    "ground_state",
    "solve_atomistic",
    "ErrorBudget",
    "SemiAnalyticCB",
    "error_budget",
    "inverse_dW",
    "invertibility_window",
    "project_pi_a",
    "solve_cb",
    "solve_cb_semianalytic",
    "surface_strain_F0",
    "CorrectorState",
    "solve_corrector",
    "sweep_layers",
    "truncate_pi_L",
    "DomainError",
    "FitError",
    "SolverError",
    "StabilityError",
    "StallError",
    "assemble_pc",
    "layer_width_rule",
    "run_converge_L",
    "run_fixed_force",
    "run_ground_state",
    "run_long_wavelength",
    "run_potential_check",
    "strain_error",
    "ExternalForce",
    "build_force",
    "read_force_csv",
    "rescale",
    "test2_profile",
    "write_force_csv",
    "SolverConfig",
    "SolveReport",
    "minimize",
    "COPPER",
    "EAMPotential",
    "PotentialParams",
]
