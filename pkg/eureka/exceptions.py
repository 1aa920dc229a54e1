"""Exceptions raised by the EUREKA toolkit."""

from __future__ import annotations


class EurekaError(Exception):
    """Base class for all EUREKA errors."""


class ConfigError(EurekaError):
    """Raised when a run configuration is invalid or incomplete."""


class DataError(EurekaError):
    """Raised when input data cannot be loaded or processed."""


class MalformedCSVError(DataError):
    """Raised when a CSV file violates the header arity."""

    def __init__(self, message: str, line_number: int | None = None) -> None:
        """Initialize the error.

        Args:
            message: Human readable description.
            line_number: 1-based line of the offending record, if known.
        """
        if line_number is not None:
            message = f"{message} (line {line_number})"
        super().__init__(message)
        self.line_number = line_number


class SchemaMismatchError(DataError):
    """Raised when a dataset does not match the schema a step expects."""


class ModelError(EurekaError, ValueError):
    """Raised when a model cannot be fitted or evaluated."""


class JudgeError(EurekaError):
    """Raised when the interestingness judge cannot produce a verdict."""

    def __init__(self, message: str, raw_response: str | None = None) -> None:
        """Initialize the error.

        Args:
            message: Human readable description.
            raw_response: The last raw reply received, if any.
        """
        super().__init__(message)
        self.raw_response = raw_response


class TransportError(JudgeError):
    """Raised when the judge endpoint cannot be reached after retries."""


class ReplyParseError(JudgeError):
    """Raised when a judge reply cannot be parsed after retries."""


class CacheError(EurekaError):
    """Raised when the transcript cache file is corrupt."""

    def __init__(self, message: str, line_number: int | None = None) -> None:
        """Initialize the error.

        Args:
            message: Human readable description.
            line_number: 1-based line of the corrupt record, if known.
        """
        if line_number is not None:
            message = f"{message} (line {line_number})"
        super().__init__(message)
        self.line_number = line_number
