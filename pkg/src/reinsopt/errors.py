"""Exception types raised across the package."""


class ReinsoptError(Exception):
    """Base class for all package errors."""


class DomainError(ReinsoptError, ValueError):
    """An argument lies outside the domain of the operation."""


class ValidationError(ReinsoptError, ValueError):
    """A value violates the invariants of its type."""


class DivergenceError(ReinsoptError, ArithmeticError):
    """A risk integral does not converge for the given loss and distortion."""


class PreconditionError(ReinsoptError, ValueError):
    """A closed-form solver was called outside its hypotheses."""


class SolverError(ReinsoptError, RuntimeError):
    """The sign-rule solver could not resolve the structure of the problem."""
