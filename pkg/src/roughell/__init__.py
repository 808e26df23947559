"""Solvers and estimate diagnostics for non-divergence elliptic equations
whose coefficients are measurable in x^1 and of vanishing mean oscillation
in the remaining variables."""

from .coefficients import (
    CoefficientFamily,
    EllipticOperator,
    apply,
    constant_operator,
    extend_odd_even,
    load_family,
    oblique_transform,
    phi_jacobian,
    phi_map,
    pullback,
    validate,
    x1_table_operator,
)
from .diagnostics import (
    SharpCheckConfig,
    lp_estimate_check,
    maximal_fn,
    sharp_fn,
    sharp_inequality_check,
    slobodeckij_seminorm,
)
from .grid import (
    BoxGrid,
    GridFunction,
    diff,
    forward_modes,
    gradient,
    hessian,
    inverse_modes,
    load_grid_function,
    lp_norm,
    save_grid_function,
)
from .halfspace import (
    Dirichlet,
    HalfSpaceProblem,
    Neumann,
    Oblique,
    Robin,
    lift_trace,
    oblique_estimate_ratio,
    robin_reduce,
    solve_dirichlet,
    solve_neumann,
    solve_oblique,
    solve_robin,
)
from .modes import ModeProblem, assemble_mode, check_coercivity, energy_check, solve_mode, solve_whole_space_x1
from .vmo import Cylinder, fit_omega, osc_xprime, vmo_modulus, vmo_report
from .wholespace import NonConvergenceError, apriori_ratio, assemble, solve, solve_problem

__all__ = [
    "apply",
    "apriori_ratio",
    "assemble",
    "assemble_mode",
    "BoxGrid",
    "check_coercivity",
    "CoefficientFamily",
    "constant_operator",
    "Cylinder",
    "diff",
    "Dirichlet",
    "EllipticOperator",
    "energy_check",
    "extend_odd_even",
    "fit_omega",
    "forward_modes",
    "gradient",
    "GridFunction",
    "HalfSpaceProblem",
    "hessian",
    "inverse_modes",
    "lift_trace",
    "load_family",
    "load_grid_function",
    "lp_estimate_check",
    "lp_norm",
    "maximal_fn",
    "ModeProblem",
    "Neumann",
    "NonConvergenceError",
    "Oblique",
    "oblique_estimate_ratio",
    "oblique_transform",
    "osc_xprime",
    "phi_jacobian",
    "phi_map",
    "pullback",
    "Robin",
    "robin_reduce",
    "save_grid_function",
    "sharp_fn",
    "sharp_inequality_check",
    "SharpCheckConfig",
    "slobodeckij_seminorm",
    "solve",
    "solve_dirichlet",
    "solve_mode",
    "solve_neumann",
    "solve_oblique",
    "solve_problem",
    "solve_robin",
    "solve_whole_space_x1",
    "validate",
    "vmo_modulus",
    "vmo_report",
    "x1_table_operator",
]

__version__ = "0.1.0"
