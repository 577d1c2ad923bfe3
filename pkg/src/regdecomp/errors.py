"""Exception types shared across the package."""


class PreconditionError(ValueError):
    """An input violates the documented preconditions of an operation."""


class BudgetExceeded(RuntimeError):
    """Exact enumeration would exceed the configured member budget."""


class IngestError(ValueError):
    """A data file could not be parsed."""
