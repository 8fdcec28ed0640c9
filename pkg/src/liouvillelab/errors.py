"""Exception types shared across the laboratory."""

from __future__ import annotations


class LabError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(LabError):
    """A caller-supplied parameter is out of its documented range."""


class DataError(LabError):
    """Input data is malformed: wrong shape, non-finite, or inconsistent."""


class MeshQualityError(LabError):
    """A mesh fails a geometric quality requirement (degenerate or inverted
    triangles, angles below the floor)."""


class NumericError(LabError):
    """A numerical procedure lost stability: singular system, overflow,
    quadrature failure, or a damping floor was hit.

    Iterative procedures attach their partial history as ``trace``.
    """

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace


class ConvergenceError(LabError):
    """An iteration exhausted its budget before meeting its tolerance.

    Carries the best iterate found so the caller can inspect or resume.
    """

    def __init__(self, message: str, best=None, trace=None):
        super().__init__(message)
        self.best = best
        self.trace = trace


class ResolutionError(LabError):
    """The requested quantity is not resolvable on this mesh: a fitting
    window, concentration scale, or sample region falls below (or beyond)
    what the triangulation can represent."""
