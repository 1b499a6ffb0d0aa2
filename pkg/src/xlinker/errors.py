"""Error taxonomy shared by the library, service, and CLI.

The CLI maps these onto its exit codes: config=2, data=3, numeric=4.
"""


class XLinkerError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1
    code = "error"


class ConfigError(XLinkerError):
    """Invalid configuration: bad ranges, missing paths, malformed config files."""

    exit_code = 2
    code = "config"


class DataError(XLinkerError):
    """Invalid data: parse failures, referential integrity, format mismatches."""

    exit_code = 3
    code = "data"


class NumericError(XLinkerError):
    """Numeric failure: non-finite values, dimension mismatches."""

    exit_code = 4
    code = "numeric"
