"""Exception hierarchy shared by every module."""


class ClubBenchError(Exception):
    """Base class for all toolkit errors."""


class InputError(ClubBenchError, ValueError):
    """Invalid argument: dimension mismatch, empty context, bad config value."""


class NumericFailure(ClubBenchError, ArithmeticError):
    """A matrix that must be positive definite is not, or an inverse has drifted."""


class DatasetError(InputError):
    """The environment data (replay file) is missing or malformed."""


class ReplayParseError(DatasetError):
    """A replay file row could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(ReplayParseError):
    """A replay row parsed but disagrees with the declared dimensions."""
