"""
GMT Toolkit Exceptions

Custom exception classes for geometric measure theory constructions.
"""

from typing import Any, Dict, Optional


class GMTError(Exception):
    """Base exception for all toolkit errors."""

    def __init__(self, message: str, error_code: Optional[int] = None) -> None:
        super().__init__(message)
        self.message = message
        self.error_code = error_code


class GMTInputError(GMTError):
    """Raised when an operation is called outside its preconditions."""

    def __init__(self, message: str = "Invalid input") -> None:
        super().__init__(message, error_code=400)


class GMTConfigurationError(GMTError):
    """Raised when configuration values or files are invalid."""

    def __init__(self, message: str = "Configuration error") -> None:
        super().__init__(message, error_code=422)


class GMTConstructionError(GMTError):
    """Raised when a geometric construction cannot be completed."""

    def __init__(self, message: str = "Construction failed") -> None:
        super().__init__(message, error_code=500)


class GMTRefinementError(GMTError):
    """Raised when the refined set loses more mass than allowed."""

    def __init__(
        self,
        message: str = "Refinement mass bound violated",
        diagnostics: Optional[Dict[str, Any]] = None,
    ) -> None:
        super().__init__(message, error_code=500)
        self.diagnostics = diagnostics or {}


class GMTEstimationError(GMTError):
    """Raised when a Monte Carlo estimate cannot be produced."""

    def __init__(self, message: str = "Estimation failed") -> None:
        super().__init__(message, error_code=503)
