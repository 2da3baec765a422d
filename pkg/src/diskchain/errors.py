from enum import Enum
from typing import Optional


class ExitCode(Enum):
    """
    Process exit codes of the `diskchain` command line.

    Every exception raised inside a subcommand is funnelled into one of these
    by `exit_code_for`, so scripts can tell bad flags from bad data from bugs.
    """

    OK = 0
    USAGE = 1  # bad flags or missing files named on the command line
    PARSE = 2  # malformed annotations, detections or map files
    INVARIANT = 3  # an internal invariant did not hold


class DiskChainError(Exception):
    """Base class for every error raised by diskchain."""


# Geometry
class DegeneratePolygon(DiskChainError, ValueError):
    pass


class DimensionMismatch(DiskChainError, ValueError):
    pass


class EmptyInput(DiskChainError, ValueError):
    pass


class DegenerateInput(DiskChainError, ValueError):
    pass


# Label generation
class UnsupportedPolygon(DiskChainError, ValueError):
    pass


class ForkedInstance(DiskChainError, ValueError):
    pass


class DegenerateWidth(DiskChainError, ValueError):
    pass


# Maps
class ThresholdOutOfRange(DiskChainError, ValueError):
    pass


class MapsFormatError(DiskChainError):
    """Base class for TSM1 decoding problems."""


class MapsIOError(MapsFormatError, OSError):
    def __init__(self, message: str, offset: Optional[int] = None) -> None:
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class BadMagic(MapsFormatError, ValueError):
    pass


class DimensionOverflow(MapsFormatError, ValueError):
    pass


class UnsupportedChannels(MapsFormatError, ValueError):
    pass


# Post-processing
class OffComponent(DiskChainError, ValueError):
    pass


class EmptyAxis(DiskChainError, ValueError):
    pass


# Rectification
class DegenerateSnake(DiskChainError, ValueError):
    pass


# Annotations and generation
class ParseError(DiskChainError, ValueError):
    def __init__(
        self, message: str, line: Optional[int] = None, path: Optional[str] = None
    ) -> None:
        self.line = line
        self.path = path
        location = []
        if line is not None:
            location.append(f"line {line}")
        if path is not None:
            location.append(path)
        if location:
            message = f"{', '.join(location)}: {message}"
        super().__init__(message)


class GenerationFailure(DiskChainError, RuntimeError):
    pass


# Benchmarks
class UnknownCase(DiskChainError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class InvariantViolation(DiskChainError, AssertionError):
    pass


def exit_code_for(exc: BaseException) -> ExitCode:
    """Map an exception raised by a subcommand to the process exit code."""
    if isinstance(exc, (ParseError, MapsFormatError)):
        return ExitCode.PARSE
    if isinstance(
        exc, (FileNotFoundError, IsADirectoryError, UnknownCase, ThresholdOutOfRange)
    ):
        return ExitCode.USAGE
    return ExitCode.INVARIANT
