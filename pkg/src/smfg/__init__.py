"""Stationary mean-field games on the periodic torus.

A monotone upwind discretization of the coupled Hamilton-Jacobi and
Fokker-Planck system, solved either by a gradient flow on a convex discrete
energy or by a mass-preserving monotone flow on the coupled operator.
"""

from .core_grid import GridFunction, PeriodicGrid1D, PeriodicGrid2D, mass, mean_zero_project, norms, stencil
from .exact import (
    ExactSolution,
    error_report,
    exact_2d_separable,
    exact_congestion,
    exact_gradient_drift,
    exact_zero_drift,
    quadrature,
)
from .flows import Trajectory, solve_gradient_flow, solve_monotonic_flow, solve_monotonic_flow_2d
from .hamiltonian import ProblemData, Variant, adjoint_apply, g_apply, linearize_apply, make_grid_data
from .integrators import FlowConfig, Integrator
from .operators import MfgState, Residual, energy_phi, hbar_from_u, residual

__all__ = [
    "ExactSolution",
    "FlowConfig",
    "GridFunction",
    "Integrator",
    "MfgState",
    "PeriodicGrid1D",
    "PeriodicGrid2D",
    "ProblemData",
    "Residual",
    "Trajectory",
    "Variant",
    "adjoint_apply",
    "energy_phi",
    "error_report",
    "exact_2d_separable",
    "exact_congestion",
    "exact_gradient_drift",
    "exact_zero_drift",
    "g_apply",
    "hbar_from_u",
    "linearize_apply",
    "make_grid_data",
    "mass",
    "mean_zero_project",
    "norms",
    "quadrature",
    "residual",
    "solve_gradient_flow",
    "solve_monotonic_flow",
    "solve_monotonic_flow_2d",
    "stencil",
]
