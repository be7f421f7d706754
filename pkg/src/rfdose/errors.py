"""Exception hierarchy shared by every stage.

The CLI maps each class to its own exit code, so callers can tell a bad
input apart from a solver that blew up.
"""


class RfdoseError(Exception):
    exit_code = 1


class DomainError(RfdoseError, ValueError):
    """Input outside the domain an operation is defined on."""

    exit_code = 2


class DataError(RfdoseError, ValueError):
    """Inconsistent data, e.g. a tissue voxel with zero density."""

    exit_code = 3


class FormatError(RfdoseError, ValueError):
    """Malformed or truncated file."""

    exit_code = 4


class NumericError(RfdoseError, ArithmeticError):
    """Non-finite values appeared during evaluation."""

    exit_code = 5


class InstabilityError(NumericError):
    exit_code = 6

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ConvergenceError(RfdoseError, RuntimeError):
    exit_code = 7

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []


class DegenerateFeedError(DomainError):
    exit_code = 8


class ConfigError(RfdoseError, ValueError):
    exit_code = 9
