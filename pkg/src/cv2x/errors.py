"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid model or configuration parameter."""


class NumericError(ArithmeticError):
    """A quadrature or truncation routine failed to reach its tolerance.

    ``estimate`` and ``error`` carry the best value obtained and its
    estimated absolute error, when available.
    """

    def __init__(self, message, estimate=None, error=None, source=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error
        self.source = source


class DomainError(ValueError):
    """Argument outside the domain of a formula (e.g. zero distance)."""


class RegimeError(ValueError):
    """Parameters fall in a regime the model does not cover."""


class DegenerateConditioningError(ArithmeticError):
    """Conditioning on an event whose probability is numerically zero."""
