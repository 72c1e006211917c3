"""Exception and warning types shared across the package."""


class MRPError(Exception):
    """Base class for all errors raised by mrpdesign."""


class ValidationError(MRPError, ValueError):
    """Input violates a documented precondition."""


class NumericalError(MRPError, ArithmeticError):
    """A computation hit a degenerate or ill-conditioned configuration."""


class DegenerateDenominatorError(NumericalError):
    """``w' M0 w`` is numerically zero, so the variance ratios are undefined."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class SingularMomentWarning(UserWarning):
    """Lag-zero covariance is singular (a spread column has zero variance)."""


class DegenerateStdWarning(UserWarning):
    """Standard deviation of a return series is zero; the Sharpe ratio is reported as 0."""


class ProximalWarning(UserWarning):
    """Surrogate built with ``tau = 0``; strong convexity is not guaranteed."""
