"""Exception types shared across the package."""


class KrefluxError(Exception):
    """Base class for package errors."""


class DegenerateFluxError(KrefluxError):
    """Raised when an operation needs a nonzero flux vector and got |x| = 0."""


class NumericalFault(KrefluxError):
    """Raised when a simulated or estimated state goes non-finite."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ConfigError(KrefluxError):
    """Scenario-config parse or validation error; carries key and line info."""

    def __init__(self, message, key=None, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.key = key
        self.line = line
