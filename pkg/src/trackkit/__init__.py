"""Index-tracking models, in-house solvers and a rolling-window backtester."""

from .core import Portfolio, TrackingProblem, finalize_weights
from .errors import (
    ConfigError,
    ContractViolation,
    DataError,
    DivergenceError,
    InfeasibleError,
    SolverError,
    TrackkitError,
)

__version__ = "0.1.0"

__all__ = [
    "Portfolio", "TrackingProblem", "finalize_weights", "ConfigError", "ContractViolation",
    "DataError", "DivergenceError", "InfeasibleError", "SolverError", "TrackkitError",
]
