"""
Exception hierarchy shared by the numerical core, the sweep layer and the CLI.
"""
from typing import Any, Dict, Optional, Sequence


class OneBitError(Exception):
    """Base class for all errors raised by this package."""

    exit_code: int = 1

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = context

    def __str__(self) -> str:
        if not self.context:
            return self.message
        details = ", ".join(f"{k}={v}" for k, v in self.context.items())
        return f"{self.message} ({details})"


class ValidationError(OneBitError, ValueError):
    """Invalid scenario, parameter, data or sweep input."""

    exit_code = 2


class ScenarioFileError(ValidationError):
    """Scenario file could not be parsed or failed validation."""

    def __init__(
        self,
        message: str,
        path: Optional[str] = None,
        line: Optional[int] = None,
        field: Optional[str] = None,
    ):
        context = {k: v for k, v in (("path", path), ("line", line), ("field", field)) if v is not None}
        super().__init__(message, **context)
        self.path = path
        self.line = line
        self.field = field


class NumericalError(OneBitError, ArithmeticError):
    """A numerical procedure failed to produce a trustworthy result."""

    exit_code = 3


class QuadratureError(NumericalError):
    """Adaptive quadrature did not converge within its evaluation budget."""

    def __init__(self, message: str, rho: Optional[Sequence[float]] = None,
                 indices: Optional[Sequence[int]] = None, **context: Any):
        if rho is not None:
            context["rho"] = tuple(round(float(r), 12) for r in rho)
        if indices is not None:
            context["indices"] = tuple(int(i) for i in indices)
        super().__init__(message, **context)
        self.rho = rho
        self.indices = indices


class FactorizationError(NumericalError):
    """A matrix expected to be positive definite could not be factorized."""


class SingularFisherError(NumericalError):
    """A Fisher matrix is singular where an inverse is required."""


class McReportInvalid(NumericalError):
    """Too many Monte-Carlo trials failed for the report to be meaningful."""


def exit_code_for(exc: BaseException) -> int:
    """Map an exception to the process exit code used by the CLI."""
    if isinstance(exc, OneBitError):
        return exc.exit_code
    return 1
