"""Exception hierarchy shared by all langevin_gf modules."""

from __future__ import annotations


class Error(Exception):
    """Base class for all errors raised by this package."""


class ArgumentError(Error):
    """An argument violates a documented precondition."""


class EvaluationError(Error):
    """A model or integrand evaluation left its numeric domain."""


class StepSizeError(Error):
    """The implicit step matrix is too ill-conditioned for the requested h."""


class CapabilityError(Error):
    """The request falls outside a closed catalog of supported cases."""


class RangeError(Error):
    """An intermediate quantity overflowed its floating-point range."""


class EstimationError(Error):
    """A Monte Carlo estimate could not be formed (e.g. trajectory blow-up)."""


class DegenerateDensityError(Error):
    """A density normalization integral is numerically zero."""


class ConfigError(Error):
    """An experiment configuration failed validation."""
