"""Exception types raised by skewcheck."""


class InputError(ValueError):
    """Malformed or dimensionally inconsistent input."""


class DomainError(ValueError):
    """Input outside the domain where an operation is defined (e.g. p == q)."""


class ImmersionError(DomainError):
    """The derivative at the base point is not injective."""


class ResourceError(RuntimeError):
    """A requested computation would exceed the configured memory budget."""


class BoundViolation(ArithmeticError):
    """A bound that must hold mathematically was observed to fail."""
