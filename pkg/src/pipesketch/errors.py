"""Exception types shared across the package."""


class PipesketchError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(PipesketchError, ValueError):
    """Invalid sketch, tracker, or workload configuration."""


class ModeError(PipesketchError):
    """An operation was called on a sketch in the wrong update mode."""


class NotTrackedError(PipesketchError, KeyError):
    """A priority counter was requested for a pid that is not tracked."""


class TraceFormatError(PipesketchError, ValueError):
    """A trace file violated the line format.

    ``line`` is the 1-based line number of the offending record, or None
    when the error is not tied to a specific line.
    """

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
