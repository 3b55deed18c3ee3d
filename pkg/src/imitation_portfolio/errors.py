"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the requested function."""


class ContractError(ValueError):
    """Inputs violate an operation's preconditions (mismatched grids, theta = 0, ...)."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values or hit a singular configuration."""


class ConvergenceError(RuntimeError):
    """An iterative method failed to converge; ``trace`` holds its history."""

    def __init__(self, message, trace=None, report=None):
        super().__init__(message)
        self.trace = list(trace or [])
        self.report = report


class InvariantError(ArithmeticError):
    """A quantity that theory places in a known range fell outside it."""
