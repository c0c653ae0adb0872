"""Exception hierarchy shared by the library and the command line."""


class NeoError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class ConfigError(NeoError, ValueError):
    """Invalid configuration (bad architecture string, bad fractions, leakage...)."""

    exit_code = 1


class DataError(NeoError, ValueError):
    """Malformed or unusable input data."""

    exit_code = 2


class ParseError(DataError):
    """A CSV row could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class BundleError(DataError):
    """A model bundle file is corrupt, truncated or of the wrong version."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (offset {offset})"
        super().__init__(message)
        self.offset = offset
