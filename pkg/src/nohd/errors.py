"""Exception hierarchy shared by the package."""


class NohdError(Exception):
    """Base class for all errors raised by :mod:`nohd`."""


class DimensionError(NohdError, ValueError):
    """Array shapes do not match what the operation requires."""


class ParameterError(NohdError, ValueError):
    """A hyperparameter is outside its valid range."""


class NumericalError(NohdError, ArithmeticError):
    """An iterative routine failed to converge."""


class SingularMatrixError(NumericalError):
    """Linear system is singular or too close to singular for LU."""


class EvaluationError(NohdError, ValueError):
    """A differentiable primitive was evaluated outside its domain."""


class DomainExitError(EvaluationError):
    """Policy parameters left the region where the policy is defined.

    ``step`` is filled in by the optimization loop when the exit happens
    mid-run.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step

    def __str__(self):
        base = super().__str__()
        if self.step is None:
            return base
        return f"{base} (at step {self.step})"


class NotAFixedPointError(NohdError, ValueError):
    """Fixed-point classification requested where the gradient is not zero."""


class ConfigError(NohdError, ValueError):
    """Experiment or game configuration could not be parsed or validated."""
