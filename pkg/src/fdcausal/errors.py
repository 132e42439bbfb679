"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class InsufficientDataError(ValueError):
    """Too few samples or observation points for the requested operation."""


class DegenerateDataError(ValueError):
    """Data carry no usable signal, e.g. all pooled samples identical."""


class ExtrapolationError(ValueError):
    """A target point lies outside the observed span; we never extrapolate silently."""


class IllConditionedError(RuntimeError):
    """A design or system matrix is numerically rank deficient."""

    def __init__(self, message: str, condition: float | None = None):
        super().__init__(message)
        self.condition = condition


class NumericalError(RuntimeError):
    """A numerical routine failed; carries context for diagnosis."""

    def __init__(self, message: str, lam: float | None = None, condition: float | None = None):
        super().__init__(message)
        self.lam = lam
        self.condition = condition
