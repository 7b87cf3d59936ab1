"""Exception hierarchy shared by all crosslag modules."""


class CrossLagError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(CrossLagError):
    """Invalid configuration value or unusable argument combination."""


class DataError(CrossLagError):
    """Malformed input data (bad schema, gaps, non-chronological rows)."""


class DimensionError(CrossLagError):
    """Array shapes incompatible with the requested operation."""


class NumericError(CrossLagError):
    """Non-finite value encountered where the contract requires finite ones."""


class CompatibilityError(CrossLagError):
    """Checkpoint, config and data do not fit together."""
