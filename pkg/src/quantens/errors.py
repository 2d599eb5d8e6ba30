"""Exception types shared across the package."""


class QuantensError(Exception):
    """Base class for all package-specific errors."""


class DataError(QuantensError):
    """Base class for problems in loaded forecast/price data."""


class SchemaError(DataError):
    """A file or row does not match the expected CSV schema."""


class CoverageError(DataError):
    """Dates/hours are missing, duplicated, or inconsistent across inputs."""


class NonFiniteError(DataError):
    """A value that must be finite is NaN or infinite."""


class ConfigError(QuantensError):
    """A run configuration file is missing, malformed, or inconsistent."""


class DegenerateDifferentialError(QuantensError):
    """The DM loss differential has zero variance (models are identical)."""


class WeightOverflowError(QuantensError):
    """Combination weights became non-finite despite log-domain evaluation."""
