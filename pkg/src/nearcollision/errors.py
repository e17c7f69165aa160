"""Exception hierarchy for the nearcollision package.

Every error raised by this package derives from NearCollisionError so
callers can catch one base type at pipeline boundaries (the CLI maps it
to exit status 2).
"""


class NearCollisionError(Exception):
    """Base class for all package errors."""


class ConfigurationError(NearCollisionError):
    """Invalid configuration: out-of-range fields, inconsistent shapes,
    malformed calibration files."""


class ShapeError(NearCollisionError):
    """Tensor or batch shape does not match what the operation expects."""


class InsufficientHistoryError(NearCollisionError):
    """A track has fewer points than velocity fitting requires."""


class FitError(NearCollisionError):
    """A predictor could not be fit (e.g. empty training set)."""


class NumericalError(NearCollisionError):
    """A tensor operation produced NaN or Inf outside of training."""


class TrainingError(NearCollisionError):
    """Training diverged or produced non-finite values."""


class CheckpointError(NearCollisionError):
    """Checkpoint file is missing, corrupt, or version-incompatible."""


class ReportError(NearCollisionError):
    """A report file could not be written or parsed."""
