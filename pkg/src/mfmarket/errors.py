"""Exception hierarchy.

Every error carries a machine-readable ``category`` and the process exit
status the CLI maps it to.
"""


class MfmarketError(Exception):
    category = "error"
    exit_code = 1


class ConfigError(MfmarketError, ValueError):
    """A configuration value violates a documented invariant."""

    category = "config"
    exit_code = 2


class DataQualityError(MfmarketError, ValueError):
    """Input data cannot support the requested computation."""

    category = "data-quality"
    exit_code = 3


class IngestError(MfmarketError, OSError):
    """The data source could not be read."""

    category = "io"
    exit_code = 4
