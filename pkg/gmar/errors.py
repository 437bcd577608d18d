"""
Error types - every failure names what broke

Value-type errors subclass ValueError and state-type errors subclass
RuntimeError so callers can catch builtins.
"""
from typing import Optional

from gmar.config import EXIT_DATA, EXIT_OK, EXIT_USAGE


class GMARError(Exception):
    """Base class for all package errors."""


class DimensionError(GMARError, ValueError):
    """Shape contract violated."""


class ParameterError(GMARError, ValueError):
    """Argument outside its documented range."""


class ConfigError(GMARError, ValueError):
    """ViTConfig (or another config) invariant violated."""


class StateError(GMARError, RuntimeError):
    """Operation called before its prerequisite ran."""


class ContractError(GMARError, RuntimeError):
    """Caller broke an API contract (mixed tapes, non-scalar loss, ...)."""


class FormatError(GMARError, ValueError):
    """Malformed file content. `offset` is the byte offset where parsing failed."""

    def __init__(self, message: str, offset: Optional[int] = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class BadMagicError(FormatError):
    """Leading magic bytes do not match."""


class TruncatedDataError(FormatError):
    """File ended before the declared content."""


class ShapeMismatchError(FormatError):
    """Stored tensor shapes disagree with the stored config."""


class InvalidHeaderError(FormatError):
    """Header fields are present but invalid."""


class DegenerateGradientWarning(UserWarning):
    """Every head in a scope had zero gradient mass; weights fell back to uniform."""


def exit_code_for(exc: BaseException) -> int:
    """
    Map an exception to the CLI exit-code contract.

    0 success, 2 usage/parameter error, 3 data/format error.
    """
    if exc is None:
        return EXIT_OK
    if isinstance(exc, (FormatError, FileNotFoundError)):
        return EXIT_DATA
    if isinstance(exc, (ParameterError, ConfigError, DimensionError, OSError)):
        return EXIT_USAGE
    return EXIT_DATA
