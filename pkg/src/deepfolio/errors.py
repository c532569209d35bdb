"""Exception hierarchy shared across the engine.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericalError -> 4.
"""


class EngineError(Exception):
    """Base class for all engine-specific failures."""


class ConfigError(EngineError):
    """Bad or inconsistent configuration."""


class DataError(EngineError):
    """Problems with input market data."""


class ParseError(DataError):
    """A CSV row failed to parse; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(DataError):
    """Data parsed but violates an invariant (e.g. non-positive price)."""


class InsufficientDataError(DataError):
    """Not enough usable rows/history for the requested operation."""


class NumericalError(EngineError):
    """Numerical failure: singular covariance, non-finite gradients, ..."""
