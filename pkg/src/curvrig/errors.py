"""Exception types shared across the toolkit."""


class CurvrigError(Exception):
    """Base class for all toolkit errors."""


class InputError(CurvrigError, ValueError):
    """Structurally invalid input: size mismatch, bad parameter, bad config value."""


class FieldDomainError(CurvrigError, ValueError):
    """Input outside the mathematical domain of an operation (e.g. u <= 0)."""


class UnsupportedDimensionError(FieldDomainError):
    """The operation is not defined in this dimension."""


class AssemblyError(CurvrigError, RuntimeError):
    """Operator assembly failed; the message names the offending cell."""


class SolverError(CurvrigError, RuntimeError):
    """An iterative solve failed to converge.

    Carries the residual history so callers can report how far it got.
    """

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []


class ConfigError(CurvrigError, ValueError):
    """Scenario file rejected; carries the 1-based line number."""

    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line
