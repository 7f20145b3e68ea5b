"""Exception types shared across the package."""


class WelfariumError(Exception):
    """Base class for every error raised by this package."""


class DslSyntaxError(WelfariumError):
    """Malformed utility-expression text; carries the offending position."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        if line is not None:
            message = f"{line}:{column}: {message}"
        super().__init__(message)
        self.line = line
        self.column = column


class EvalError(WelfariumError):
    """A utility expression referenced a cell or time step outside its host."""


class CapExceededError(WelfariumError):
    """An enumeration would exceed its configured cap."""


class DegenerateEvidenceError(WelfariumError):
    """All likelihood mass vanished; the posterior is undefined."""


class ConfigError(WelfariumError):
    """Invalid experiment configuration; the message names the offending key."""
