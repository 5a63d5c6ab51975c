"""Exception hierarchy for brcat."""


class BrcatError(Exception):
    """Base class for all errors raised by brcat."""


class DataError(BrcatError, ValueError):
    """Malformed input data. ``row`` is the 1-based source row when known."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class ModelError(BrcatError, ValueError):
    """Model specification incompatible with the data."""


class RankDeficiencyError(ModelError):
    def __init__(self, message, dependent_columns=()):
        super().__init__(message)
        self.dependent_columns = tuple(dependent_columns)


class SingularInformationError(BrcatError, ArithmeticError):
    """Expected information is numerically singular (often a sign of separation)."""


class ConvergenceError(BrcatError, RuntimeError):
    """Iteration limit reached without convergence or divergence classification."""

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class SolverError(BrcatError, RuntimeError):
    """Linear-programming solver failure (cycling guard or infeasible set-up)."""
