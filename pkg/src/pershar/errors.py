"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError -> 2,
NumericError -> 3.
"""


class PersharError(Exception):
    pass


class ConfigError(PersharError, ValueError):
    """Invalid or incomplete run configuration."""


class DataError(PersharError, ValueError):
    """Input data that cannot be used as given."""


class IngestError(DataError):
    """A dataset file is missing or malformed."""


class NumericError(PersharError, ArithmeticError):
    """Non-finite values surfaced during optimisation."""
