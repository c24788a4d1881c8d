"""Exception hierarchy shared across the package.

The CLI maps these to exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4.
"""


class DygadError(Exception):
    """Base class for all package errors."""


class ConfigError(DygadError):
    """Invalid or inconsistent configuration."""


class DataError(DygadError):
    """Malformed input data or an operation that is impossible on it."""


class NumericError(DygadError):
    """Non-finite values or other numeric failures during computation."""
