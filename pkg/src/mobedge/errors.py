class MobedgeError(Exception):
    """Base class for errors raised by this package."""


class DomainError(MobedgeError, ValueError):
    """Input outside the domain where an operation is defined."""


class SingularError(MobedgeError, ArithmeticError):
    """A quantity that must be inverted vanishes (within tolerance)."""


class ConvergenceError(MobedgeError, RuntimeError):
    """An iterative method failed to converge."""


class BudgetError(MobedgeError):
    """A requested computation exceeds the configured budget."""
