"""Exception types shared across the package.

The CLI maps these onto stable exit codes (see ``bomhe.cli``): bad
arguments/config exit 2, numeric failures exit 3, I/O problems exit 4.
"""


class BomheError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(BomheError, ValueError):
    """An argument violates a documented precondition."""


class ConfigError(BomheError):
    """An experiment config file failed validation."""

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{field}: {message}"
        super().__init__(message)


class NumericDivergenceError(BomheError, ArithmeticError):
    """A simulation or solve produced a non-finite value."""

    def __init__(self, message, step=None):
        self.step = step
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)


class IllConditionedKernelError(BomheError, ArithmeticError):
    """The GP kernel matrix could not be factored even after jitter escalation."""


class SingularWindowError(BomheError, ArithmeticError):
    """The stacked window least-squares system is rank deficient."""

    def __init__(self, message, window=None):
        self.window = window
        if window is not None:
            message = f"{message} (window t={window})"
        super().__init__(message)


class SingularInnovationError(BomheError, ArithmeticError):
    """The innovation matrix C P C^T + R in the covariance update is singular."""

    def __init__(self, message, window=None):
        self.window = window
        if window is not None:
            message = f"{message} (window t={window})"
        super().__init__(message)
