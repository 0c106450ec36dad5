# -*- coding: utf-8 -*-
""" Exceptions raised by ``hdsvar``. """


class HdsvarError(Exception):
    """Root of every error raised on purpose by ``hdsvar``."""


class DataError(HdsvarError, ValueError):
    """Input data is malformed, mis-shaped, or too short for the requested operation."""


class UsageError(HdsvarError, ValueError):
    """Options or arguments are inconsistent with each other."""


class NumericalError(HdsvarError, ArithmeticError):
    """A numerical procedure could not produce a trustworthy result."""


class UnstableModelError(NumericalError):
    """The companion matrix of a model has spectral radius at or too close to one."""


class NotPositiveDefiniteError(NumericalError):
    """A matrix required to be positive definite is not.

    Args:
        message: Human readable description.
        minor: Size of the first leading minor that failed, if known.
    """

    def __init__(self, message: str, minor: int = None) -> None:
        super().__init__(message)
        self.minor = minor


class DegenerateProjectionError(NumericalError):
    """The projection denominator of a de-sparsified estimator vanished."""
