class CaudaError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(CaudaError, ValueError):
    """Invalid configuration or arguments (CLI exit code 2)."""


class DataError(CaudaError, ValueError):
    """Dataset violates a type invariant or cannot be parsed."""


class StageError(CaudaError, RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
