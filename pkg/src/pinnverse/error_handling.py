"""Exception hierarchy and centralized error reporting for pinnverse."""

import logging
from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)


class PinnverseError(Exception):
    """Base class for all pinnverse failures."""


class DimensionMismatchError(PinnverseError, ValueError):
    """Operands of incompatible shape were combined."""


class IntegrationError(PinnverseError):
    """Density-matrix integration left the physical state space."""

    def __init__(self, message: str, time: float) -> None:
        super().__init__(f"{message} at t={time:.6g}")
        self.time = time
        self.message = message

    def __reduce__(self) -> Any:
        return (type(self), (self.message, self.time))


class GeneratorConsistencyError(PinnverseError):
    """Pauli-basis generator picked up imaginary parts (sign or convention bug)."""


class UnsupportedPrimitiveError(PinnverseError):
    """A tape node has no reverse-mode rule."""


class DivergenceError(PinnverseError):
    """Loss became non-finite during a single restart."""

    def __init__(self, seed: int, step: int) -> None:
        super().__init__(f"Loss diverged at step {step} (seed {seed})")
        self.seed = seed
        self.step = step

    def __reduce__(self) -> Any:
        return (type(self), (self.seed, self.step))


class AllRestartsFailedError(PinnverseError):
    """Every restart of a fit diverged."""


class IngestionError(PinnverseError, ValueError):
    """Malformed data file. ``row`` is the 1-based file line (header is line 1)."""

    def __init__(
        self, message: str, row: Optional[int] = None, column: Optional[str] = None
    ) -> None:
        location = ""
        if row is not None:
            location += f" (row {row}"
            location += f", column {column})" if column else ")"
        elif column:
            location += f" (column {column})"
        super().__init__(f"{message}{location}")
        self.row = row
        self.column = column
        self.message = message

    def __reduce__(self) -> Any:
        return (type(self), (self.message, self.row, self.column))


class UndefinedMetricError(PinnverseError, ValueError):
    """A metric has no admissible entries."""


class ConfigurationError(PinnverseError, ValueError):
    """Invalid or unresolvable experiment configuration."""


def report_error(
    exception: BaseException,
    component: str,
    context_name: Optional[str] = None,
    additional_context: Optional[Dict[str, Any]] = None,
    level: int = logging.ERROR,
) -> Dict[str, Any]:
    """Log a structured error record and return it.

    Args:
        exception: The exception that occurred
        component: Component where the error occurred (e.g. "sweep_runner")
        context_name: Short name for the failing operation
        additional_context: Extra key/value context (seeds, grid values)
        level: Logging level for the record

    Returns:
        The record that was logged
    """
    record: Dict[str, Any] = {
        "component": component,
        "context": context_name or "",
        "error_type": type(exception).__name__,
        "message": str(exception),
    }
    if additional_context:
        record.update(additional_context)

    details = ", ".join(f"{k}={v}" for k, v in record.items())
    exc_info = exception if level >= logging.ERROR else None
    logger.log(level, f"Error report: {details}", exc_info=exc_info)
    return record
