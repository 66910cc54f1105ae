"""Exception types shared across the pipeline."""

from __future__ import annotations


class QuadratureConvergenceError(ArithmeticError):
    """Node doubling hit its limit before successive estimates agreed."""

    def __init__(self, message, last=None, previous=None):
        super().__init__(message)
        self.last = last
        self.previous = previous


class InsufficientPrecisionError(ArithmeticError):
    """A factorization met a non-positive (or vanishing) pivot at ``index``.

    Raising precision_bits is the usual remedy.
    """

    def __init__(self, message, index):
        super().__init__(message)
        self.index = index
