"""Exception types shared across driftkit."""


class DriftkitError(Exception):
    """Base class for all driftkit errors."""


class DomainError(DriftkitError, ValueError):
    """A value was evaluated outside the domain where it is defined."""


class ConvergenceError(DriftkitError, ArithmeticError):
    """Adaptive quadrature did not reach its tolerance.

    ``estimate`` carries the best value obtained before giving up.
    """

    def __init__(self, message, estimate):
        super().__init__(message)
        self.estimate = estimate


class PreconditionError(DriftkitError, ValueError):
    """A theorem's hypothesis failed an exact or sampled check.

    ``witness`` identifies where it failed (a state label, a pair of
    points, a level index pair, ...).
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class StateSpaceError(DriftkitError, ValueError):
    """Requested chain is outside the supported size range."""


class EstimationError(DriftkitError, RuntimeError):
    """Monte Carlo statistics cannot be formed (e.g. every trial hit the step cap)."""
