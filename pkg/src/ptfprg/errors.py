"""Exception types shared across the package."""


class SeedUnderflowError(ValueError):
    """A bit stream or master seed ran out before the layout was filled."""

    def __init__(self, message, family=None):
        super().__init__(message)
        self.family = family


class ConvergenceError(ArithmeticError):
    """An iterative numeric routine hit its iteration cap."""


class NotClosedFormError(ValueError):
    """No analytic expectation is available for a threshold case."""
