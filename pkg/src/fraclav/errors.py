"""Exception types shared across the package."""


class DomainError(ValueError):
    """Parameters violate a constraint of the construction."""


class SingularPointError(ValueError):
    """A field was requested on the contact set where it is undefined."""


class BudgetError(RuntimeError):
    """A quadrature or search exceeded its configured resource budget."""
