"""Exception hierarchy shared by every feats module."""


class FeatsError(Exception):
    """Base class for all errors raised by feats."""


class DimensionError(FeatsError, ValueError):
    """Operand shapes are incompatible."""


class ConfigError(FeatsError, ValueError):
    """A configuration value is out of range or inconsistent."""


class DataError(FeatsError, ValueError):
    """Input data is malformed, missing or contains invalid values."""


class UnsupportedFeatureError(DataError):
    """Input uses a format feature that is deliberately not supported."""


class TrainingError(FeatsError, RuntimeError):
    """Optimization produced non-finite values or otherwise failed."""

    def __init__(self, message, last_finite_epoch=None):
        super().__init__(message)
        self.last_finite_epoch = last_finite_epoch


class StateError(FeatsError, RuntimeError):
    """An object was used before it reached the required state."""


class StatisticsError(FeatsError, ValueError):
    """Not enough data to compute a requested statistic."""


class UnsupportedVersionError(FeatsError, ValueError):
    """A serialized file carries a format version this build cannot read."""
