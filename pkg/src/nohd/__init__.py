"""Newton-type optimization for differentiable n-player games.

Modules
-------
linalg    dense symmetric eigensolver, PT-inverse, linear solves
deriv     hyper-dual forward-mode gradients and Hessians
gamecore  simultaneous gradient, game Jacobian and its Helmholtz split
games     matrix games and analytic test games
optim     NOHD and baseline update rules, run loop
estim     sampled policy-gradient estimators of the game quantities
harness   experiment runner and ``nohd`` command-line tool
"""

from nohd.errors import (ConfigError, DimensionError, DomainExitError, EvaluationError,
                         NohdError, NotAFixedPointError, NumericalError, ParameterError,
                         SingularMatrixError)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DimensionError", "DomainExitError", "EvaluationError", "NohdError",
    "NotAFixedPointError", "NumericalError", "ParameterError", "SingularMatrixError",
]
