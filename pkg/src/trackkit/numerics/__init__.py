"""In-house solvers: simplex LP, simplex/box QP, NNLS, Jacobi eigen, support search."""

from .eigen import sym_eigen
from .lp import LinearProgram, LpSolution, LpStatus, constraint_violation, solve_lp
from .nnls import nnls
from .qp import QpResult, QuadraticProgram, project_box, project_simplex, solve_qp
from .selection import (
    ExactEnumerate,
    RelaxSelectReoptimize,
    SelectionResult,
    SwapLocalSearch,
    parse_strategy,
    search_support,
)

__all__ = [
    "sym_eigen", "LinearProgram", "LpSolution", "LpStatus", "constraint_violation", "solve_lp",
    "nnls", "QpResult", "QuadraticProgram", "project_box", "project_simplex", "solve_qp",
    "ExactEnumerate", "RelaxSelectReoptimize", "SelectionResult", "SwapLocalSearch",
    "parse_strategy", "search_support",
]
