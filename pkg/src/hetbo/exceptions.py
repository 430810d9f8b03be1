"""Exception types shared across the package.

The CLI maps these onto process exit codes: invalid input -> 2,
numerical failure -> 3.
"""


class InvalidInputError(ValueError):
    """Raised when user-supplied data violates a precondition."""


class NumericalError(RuntimeError):
    """Raised when a linear-algebra step fails beyond recovery."""
