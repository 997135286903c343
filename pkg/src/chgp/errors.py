"""Exception types raised across the package."""

import numpy as np


class DomainError(ValueError):
    """An argument lies outside the domain of the requested function."""


class ConvergenceError(ArithmeticError):
    """A numerical routine could not meet its tolerance."""


class DecompositionError(np.linalg.LinAlgError):
    """A covariance matrix could not be factorized, even after jitter."""


class BracketError(ValueError):
    """A root could not be bracketed inside the search interval."""


class OptimizationError(RuntimeError):
    """Every optimizer start failed.

    The best partial state seen before failure (possibly ``None``) is kept on
    :attr:`best`.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
