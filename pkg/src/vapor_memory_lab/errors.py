"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: config problems exit 2, numeric or
model-validity problems exit 3, fit non-convergence exit 4.
"""


class VaporMemoryError(Exception):
    """Base class for all package errors."""


class DomainError(VaporMemoryError, ValueError):
    """An input value is outside the domain an operation is defined on."""


class ConfigError(VaporMemoryError, ValueError):
    """Invalid, unparsable, or incomplete experiment configuration."""


class ModelError(VaporMemoryError):
    """The forward model is invalid or numerically unusable at these inputs."""


class AccuracyError(ModelError):
    """A quadrature or numeric scheme failed its convergence check."""


class DegeneracyError(ModelError):
    """Parameters hit a (measure-zero) degeneracy, e.g. a vanishing denominator."""


class PeakNotFoundError(ModelError):
    """A required spectral or temporal peak could not be resolved."""


class OverlapError(DomainError):
    """Pulse-sequence timings collide (write and read pulses overlap)."""


class ResolutionError(DomainError):
    """A binning or sampling choice is too coarse for the requested analysis."""


class FitError(VaporMemoryError):
    """A fit could not produce a usable result (distinct from non-convergence,
    which is reported through the result status)."""


class AccuracyWarning(UserWarning):
    """Result is returned but a sampling precondition was not met."""
