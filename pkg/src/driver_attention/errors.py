"""Exception hierarchy shared across the pipeline stages."""

from __future__ import annotations


class AttentionError(Exception):
    """Base class for every error raised by this package."""


class InvalidInput(AttentionError, ValueError):
    pass


class OutOfRange(AttentionError, ValueError):
    pass


class DegenerateBearing(AttentionError, ValueError):
    pass


class UndistortFailure(AttentionError):
    pass


class DegenerateHomography(AttentionError):
    pass


class PoseInfeasible(AttentionError):
    pass


class ScanFailure(AttentionError):
    """A GM-PHD update could not be repaired numerically."""


class EmptyCase(AttentionError):
    pass


class DegenerateClustering(AttentionError):
    pass


class SpecError(AttentionError, ValueError):
    """A synthetic scenario description cannot be realised."""


class InputFileError(AttentionError):
    """Unreadable or malformed input file; carries file and line."""

    def __init__(self, path, line: int | None, message: str):
        self.path = str(path)
        self.line = line
        where = self.path if line is None else f"{self.path}:{line}"
        super().__init__(f"{where}: {message}")
