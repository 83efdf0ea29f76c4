"""Exception hierarchy shared by every trackkit module."""


class TrackkitError(Exception):
    """Base class for all library errors."""


class DataError(TrackkitError):
    """Malformed, missing or insufficient input data."""


class ParseError(DataError):
    """A CSV cell could not be parsed; carries the offending row and column."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class OrderingError(DataError):
    """Dates are duplicated or otherwise not strictly increasing."""


class EmptyUniverseError(DataError):
    pass


class InsufficientDataError(DataError):
    pass


class InfeasiblePlanError(DataError):
    pass


class InfeasibleError(TrackkitError):
    """A constraint set admits no point (e.g. box bounds cannot reach the budget)."""


class ContractViolation(TrackkitError):
    """An input broke a documented precondition (shape, symmetry, range)."""


class SolverError(TrackkitError):
    """A solver failed; ``model`` names the tracking model when known."""

    def __init__(self, message, model=None, status=None):
        super().__init__(message if model is None else f"[{model}] {message}")
        self.model = model
        self.status = status


class DivergenceError(TrackkitError):
    """Neural training produced a non-finite loss."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class ConfigError(TrackkitError):
    """Invalid run configuration."""
