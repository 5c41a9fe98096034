"""Problem package: data model, problem files, costs and admissibility on grids."""

from .costing import (
    boundary_error,
    check_admissible,
    cost_P,
    cost_Ptau,
    default_pair,
    dynamics_residuals,
    pair_on_grid,
    trapezoid,
)
from .grid import GridFn, uniform_nodes
from .loader import load_problem, parse_problem_text
from .model import AdmissiblePair, FixedControlProblem, OCProblem, TauQuadruple, fix_control

__all__ = [
    "AdmissiblePair",
    "FixedControlProblem",
    "GridFn",
    "OCProblem",
    "TauQuadruple",
    "boundary_error",
    "check_admissible",
    "cost_P",
    "cost_Ptau",
    "default_pair",
    "dynamics_residuals",
    "fix_control",
    "load_problem",
    "pair_on_grid",
    "parse_problem_text",
    "trapezoid",
    "uniform_nodes",
]
