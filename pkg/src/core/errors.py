"""
Error Types - Quartet

One hierarchy for the whole toolkit. The CLI maps DomainError to exit
code 1 and NumericalError to exit code 2; sweeps record either kind in a
per-row flag instead of aborting.
"""

from typing import Iterable, List, Optional


class QuartetError(Exception):
    """Base class for every error raised by quartet."""


class DomainError(QuartetError, ValueError):
    """Inputs fall outside a validity window."""

    def __init__(self, message: str, conditions: Optional[Iterable[str]] = None):
        super().__init__(message)
        self.conditions: List[str] = list(conditions or [])


class NumericalError(QuartetError, RuntimeError):
    """A numerical procedure failed on otherwise valid inputs."""


class ConvergenceError(NumericalError):
    """Iteration cap reached without meeting the tolerance."""


class NullSolutionError(NumericalError):
    """Boundary-value solve collapsed onto the trivial vacuum path."""


class OffShellError(NumericalError):
    """Euclidean energy is not conserved, so the kinetic action formula is invalid."""


class PoleError(NumericalError):
    """A Gamma function argument sits on a pole (extra zero mode)."""


class SoftModeError(NumericalError):
    """The regulated determinant does not see exactly one soft mode."""


class SaturationError(NumericalError):
    """Gelfand-Yaglom ratio still depends on the half-span."""


class StalledTrajectoryError(NumericalError):
    """Path velocity vanishes on the interior; the comoving frame is undefined."""


class ParityLabelError(NumericalError):
    """An eigenvector cannot be assigned to a single symmetry sector."""


class MappingError(NumericalError):
    """Composite-molecule parameter mapping failed its round-trip check."""
