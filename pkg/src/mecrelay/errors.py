"""Exception types raised by the solvers."""


class MecRelayError(Exception):
    """Base class for all package errors."""


class DomainError(MecRelayError, ValueError):
    """An argument lies outside the domain of a formula."""


class InfeasibleError(MecRelayError):
    """A requested point or offload amount violates a hard constraint."""


class NumericError(MecRelayError, ArithmeticError):
    """A numerical routine produced a non-finite value or stalled.

    ``payload`` carries whatever diagnostic state the raiser had at hand
    (offending argument, iterate dump, trace, ...).
    """

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload


class ConvergenceError(NumericError):
    """An iteration budget was exhausted before the stopping rule fired."""


class InconsistencyError(MecRelayError):
    """Allocation vectors contradict each other (e.g. energy on a zero slot)."""
