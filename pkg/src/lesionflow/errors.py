"""Exception hierarchy shared across the package."""

from __future__ import annotations


class LesionFlowError(Exception):
    """Base class for all domain errors raised by this package."""


class ConfigError(LesionFlowError):
    """Invalid or unparseable configuration."""


class UnknownBackend(LesionFlowError):
    """Backend kind not recognized by the model registry."""


class LoadFailure(LesionFlowError):
    """Backend initialization failed; the registry stays empty so the next
    acquisition retries."""


class BackendFailure(LesionFlowError):
    """Prediction failed. ``index_range`` names the half-open chunk of batch
    indices that failed, when known."""

    def __init__(self, message: str, index_range: tuple[int, int] | None = None):
        super().__init__(message)
        self.index_range = index_range


class MalformedImage(LesionFlowError):
    """Input image missing, undecodable, or with an unusable shape."""


class UnknownClass(LesionFlowError):
    """Label not present in the configured taxonomy."""


class SplitTooSmall(LesionFlowError):
    """A class has too few records to stratify."""


class DirUnreadable(LesionFlowError):
    """Input directory missing or not readable."""


class DirUnwritable(LesionFlowError):
    """Destination directory cannot be created or written."""


class CalibrationInfeasible(LesionFlowError):
    """Timing targets imply a negative model parameter. ``parameter`` names
    the offending field."""

    def __init__(self, message: str, parameter: str | None = None):
        super().__init__(message)
        self.parameter = parameter
