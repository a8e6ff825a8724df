"""Exception types shared across the package.

The CLI maps these onto exit codes, so keep the hierarchy flat.
"""


class InvalidParameter(ValueError):
    """An input is outside the domain an operation accepts."""


class DegenerateInput(InvalidParameter):
    """A bound or construction is undefined for this (valid) input."""


class BudgetExceeded(RuntimeError):
    """A size estimate is above the configured resource limit."""

    def __init__(self, message: str, estimate: int | None = None, budget: int | None = None):
        super().__init__(message)
        self.estimate = estimate
        self.budget = budget


class InternalInconsistency(AssertionError):
    """A guarantee the construction relies on was observed to fail."""
