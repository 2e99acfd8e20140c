"""Desk-scale solver and verification harness for a viscous Cahn-Hilliard
tumor-growth system with vanishing-viscosity rate studies."""

__version__ = "0.1.0"

from .grid import (Field, Grid, NormTriple, inner_h, laplacian_neumann, mean,
                   norms, read_field, riesz_apply, riesz_solve, write_field)
from .model import (ModelParams, State, energy, init_consistent, reaction,
                    residual_limit, residual_viscous)
from .potentials import (CouplingSpec, PotentialSpec, check_rate_admissible,
                         coupling_eval, potential_eval)
from .stepper import SolveConfig, StepReport, Trajectory, integrate, step
from .diagnostics import (ErrorReport, NormAccumulator, RateReport,
                          error_norms, fit_rate, uniform_bound_report)

__all__ = [
    "Field", "Grid", "NormTriple", "inner_h", "laplacian_neumann", "mean",
    "norms", "read_field", "riesz_apply", "riesz_solve", "write_field",
    "ModelParams", "State", "energy", "init_consistent", "reaction",
    "residual_limit", "residual_viscous",
    "CouplingSpec", "PotentialSpec", "check_rate_admissible",
    "coupling_eval", "potential_eval",
    "SolveConfig", "StepReport", "Trajectory", "integrate", "step",
    "ErrorReport", "NormAccumulator", "RateReport", "error_norms",
    "fit_rate", "uniform_bound_report",
]
