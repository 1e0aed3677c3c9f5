"""
Exception hierarchy shared by the physics modules and the CLI.

Validation problems map to exit code 1, numerical failures to exit code 2.
"""


class SGCError(Exception):
    """Base class for all errors raised by this package"""
    exit_code = 2


class ValidationError(SGCError, ValueError):
    """Raised when an input violates a documented precondition"""
    exit_code = 1


class ConfigValidationError(ValidationError):
    """Raised when a run config violates the schema; carries the dotted key path"""

    def __init__(self, key_path, message):
        self.key_path = key_path
        super().__init__(f"{key_path}: {message}" if key_path else message)


class NumericalError(SGCError, ArithmeticError):
    """Raised when a numerical procedure fails"""
    exit_code = 2


class SolverError(NumericalError):
    """Raised when a linear system is singular or too ill-conditioned to trust"""

    def __init__(self, message, condition_number=None):
        self.condition_number = condition_number
        if condition_number is not None:
            message = f"{message} (condition number {condition_number:.3e})"
        super().__init__(message)


class ConvergenceError(NumericalError):
    """Raised when an iterative procedure stops without meeting its tolerance"""

    def __init__(self, message, residual=None, last_iterate=None):
        self.residual = residual
        self.last_iterate = last_iterate
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)


class StepSizeError(NumericalError):
    """Raised when the ODE integrator's step size underflows"""
    pass


def exit_code_for(exc):
    """Map an exception to the CLI exit status"""
    if isinstance(exc, SGCError):
        return exc.exit_code
    if isinstance(exc, (ValueError, TypeError, KeyError)):
        return 1
    return 2
