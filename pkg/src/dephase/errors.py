"""Exception types shared across the library."""


class ValidationError(ValueError):
    """Input violates a documented precondition or invariant."""


class NumericalError(RuntimeError):
    """A numerical routine failed to reach its accuracy target."""
