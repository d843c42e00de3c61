from typing import Any, Dict, List, Optional

from constants import EXIT_NUMERICAL, EXIT_VALIDATION


class SlipChannelError(Exception):
    """Base class for every error raised by the solver and its diagnostics."""

    exit_code: int = EXIT_NUMERICAL

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics: Dict[str, Any] = diagnostics or {}


class ConfigValidationError(SlipChannelError, ValueError):
    exit_code = EXIT_VALIDATION

    def __init__(self, problems: List[str]):
        self.problems = list(problems)
        lines = "\n".join(f"  - {p}" for p in self.problems)
        super().__init__(f"{len(self.problems)} configuration problem(s):\n{lines}")


class DomainError(SlipChannelError, ValueError):
    exit_code = EXIT_VALIDATION


class GeometryError(SlipChannelError, ValueError):
    exit_code = EXIT_VALIDATION


class DomainTooShortError(GeometryError):
    pass


class MeshQualityError(GeometryError):
    pass


class InvalidIntervalError(SlipChannelError, ValueError):
    exit_code = EXIT_VALIDATION


class InvalidGridError(SlipChannelError, ValueError):
    exit_code = EXIT_VALIDATION


class SpaceLayoutError(SlipChannelError, ValueError):
    exit_code = EXIT_VALIDATION


class FormSelectionError(SlipChannelError, ValueError):
    exit_code = EXIT_VALIDATION


class DegenerateInputError(SlipChannelError, ValueError):
    exit_code = EXIT_VALIDATION


class EmptyRegionError(DegenerateInputError):
    pass


class PreconditionError(SlipChannelError, ValueError):
    exit_code = EXIT_VALIDATION


class SolverBreakdownError(SlipChannelError):
    pass


class NonConvergenceError(SlipChannelError):
    """Carries the last iterate as `partial` so callers can still report on it."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None, partial: Any = None):
        super().__init__(message, diagnostics)
        self.partial = partial


class EigenSolverError(SlipChannelError):
    pass


class RigidMotionLeakError(EigenSolverError):
    pass
