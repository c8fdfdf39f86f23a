"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input outside the domain of a potential, force or solver routine."""


class FitError(ValueError):
    """Not enough usable data for an exponential decay fit."""


class SolverError(RuntimeError):
    """An iterative solve failed to converge.

    The ``report`` attribute carries the :class:`~surfpc.optimize.SolveReport`
    of the failed run when one is available.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class StallError(SolverError):
    """Backtracking line search shrank the step below the minimum."""


class StabilityError(SolverError):
    """A Hessian (or linearised recursion) failed a positivity condition."""
