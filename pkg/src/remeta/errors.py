"""Exception types raised across the package."""


class MetaAnalysisError(Exception):
    """Base class for all package errors."""


class DomainError(MetaAnalysisError, ValueError):
    """An argument lies outside the domain of a function."""


class ContractError(MetaAnalysisError, ValueError):
    """Arguments are individually valid but mutually inconsistent."""


class InsufficientDataError(MetaAnalysisError, ValueError):
    """Too few studies for the requested operation (k >= 2 needed)."""


class ConvergenceError(MetaAnalysisError, RuntimeError):
    """An iterative solver did not converge.

    The last iterate is kept on ``last`` so callers can inspect it.
    """

    def __init__(self, message, last=None, iterations=None):
        super().__init__(message)
        self.last = last
        self.iterations = iterations


class CsvFormatError(MetaAnalysisError, ValueError):
    """Malformed study CSV input. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
