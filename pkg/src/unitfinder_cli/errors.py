from collections.abc import Mapping
from typing import Any, ClassVar, Optional

from unitfinder_cli.constants import EXIT_DATA_ERROR, EXIT_NUMERICAL_ERROR, EXIT_USAGE


class UnitFinderError(Exception):
    """Base class for the errors raised by the library."""

    exit_code: ClassVar[int] = EXIT_USAGE


class ConfigError(UnitFinderError):
    """Raised when a hyperparameter or a manifest value is invalid"""


class DataError(UnitFinderError):
    """Raised when a corpus, a checkpoint or a result file cannot be used"""

    exit_code = EXIT_DATA_ERROR


class NumericalError(UnitFinderError):
    """
    Raised when a loss or an objective stops being finite.

    The ``diagnostics`` mapping holds the values that were being tracked when the failure was
    detected (step counter, last finite loss, multipliers...).
    """

    exit_code = EXIT_NUMERICAL_ERROR

    def __init__(self, message: str, diagnostics: Optional[Mapping[str, Any]] = None) -> None:
        self.diagnostics = dict(diagnostics or {})
        if self.diagnostics:
            details = ", ".join(f"{k}={v}" for k, v in self.diagnostics.items())
            message = f"{message} ({details})"
        super().__init__(message)


class ShapeMismatchError(UnitFinderError, ValueError):
    """Raised when an operation receives operands with incompatible shapes"""

    exit_code = EXIT_NUMERICAL_ERROR

    def __init__(self, operation: str, expected: Any, actual: Any) -> None:
        self.operation = operation
        self.expected = expected
        self.actual = actual
        super().__init__(f"{operation}: expected shape {expected}, got {actual}")
