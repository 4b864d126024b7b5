"""Exception hierarchy for orcasim.

Every error raised by the package derives from :class:`OrcaError` and
carries an ``exit_code`` used by the command-line front end:

* 1 -- configuration / input-validation problems,
* 2 -- numerical problems (solver blow-up, failed calibration),
* 3 -- analysis problems (fits, histogram extraction).
"""

from __future__ import annotations


class OrcaError(Exception):
    """Base class for all orcasim errors."""

    exit_code = 2


class ConfigurationError(OrcaError):
    """Invalid configuration file, argument or object field."""

    exit_code = 1


class DomainError(ConfigurationError):
    """A physical input lies outside the validity range of a model."""


class SolverError(OrcaError):
    """Numerical failure inside the propagation solver."""

    exit_code = 2


class NumericalInstabilityError(SolverError):
    """The marched fields left the finite range; reports where and when."""


class CalibrationError(SolverError):
    """A requested calibration target cannot be bracketed or reached."""


class OptimizationError(SolverError):
    """Every objective evaluation in an optimization run failed."""


class AnalysisError(OrcaError):
    """Failure while reducing synthetic or recorded count data."""

    exit_code = 3


class FitError(AnalysisError):
    """Model fit failed to converge or the data are degenerate."""

    def __init__(self, message: str, last_params: tuple | None = None):
        super().__init__(message)
        self.last_params = last_params


class ExtractionError(AnalysisError):
    """Histogram bookkeeping is inconsistent (binning, reference counts)."""


class WindowRangeError(AnalysisError):
    """An integration window does not lie inside the histogram span."""
