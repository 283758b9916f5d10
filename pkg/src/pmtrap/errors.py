"""Exception types shared across the toolkit."""


class PmtrapError(Exception):
    """Base class for toolkit errors."""


class InvalidGeometryError(PmtrapError, ValueError):
    """Mirror or particle geometry violates its invariants."""


class ConfigError(PmtrapError, ValueError):
    """Experiment configuration failed validation.

    ``details`` carries one message per offending field.
    """

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = list(details or [])


class FitError(PmtrapError, RuntimeError):
    """A model fit could not be performed or did not converge."""


class NoPeakError(FitError):
    """Spectrum has no peak of sufficient SNR to fit."""


class InsufficientDataError(PmtrapError, ValueError):
    """Not enough samples to run the requested estimate."""


class UndefinedResultError(PmtrapError, ValueError):
    """The requested statistic is undefined for this input (e.g. empty channel)."""


class MissingArtifactError(PmtrapError, FileNotFoundError):
    """A dataset artifact named in the manifest is absent or corrupt."""
