"""Exception types shared across the package."""


class IrlossError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(IrlossError, ValueError):
    """A precondition on an argument was violated."""


class ShapeError(InvalidArgumentError):
    """Array dimensions do not match the declared contract."""


class ParseError(IrlossError):
    """A data file could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CheckpointError(IrlossError):
    """A model checkpoint file is truncated, malformed, or otherwise corrupt."""


class DivergenceError(IrlossError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, stage: int | None = None, epoch: int | None = None):
        self.stage = stage
        self.epoch = epoch
        super().__init__(message)


class ConfigError(IrlossError):
    """A run configuration is invalid."""
