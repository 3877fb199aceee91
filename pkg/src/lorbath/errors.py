"""Exception and warning types shared across the package."""


class ParameterError(ValueError):
    """Invalid physical or numerical parameter."""


class RegimeError(ValueError):
    """A closed form was requested outside the regime it is valid for."""


class ConvergenceError(RuntimeError):
    """Numerical routine failed to meet its tolerance.

    ``estimate`` carries the achieved error estimate (quadrature) or the last
    accepted time (integrators) when available.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class ConsistencyError(ArithmeticError):
    """An internal identity that must hold by construction was violated."""


class NearPoleWarning(RuntimeWarning):
    """Bose occupation evaluated with beta*omega close to zero."""
