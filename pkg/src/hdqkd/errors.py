"""Exception types shared across the package."""


class ContractError(ValueError):
    """An argument violates the documented preconditions of an operation."""


class UndefinedMetricError(ArithmeticError):
    """A metric would divide by a vanishing probability (e.g. P = 0)."""


class AccuracyError(RuntimeError):
    """Numerical integration did not reach the requested tolerance.

    The best estimate obtained so far is kept on ``estimate`` so callers can
    still report partial results.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error
