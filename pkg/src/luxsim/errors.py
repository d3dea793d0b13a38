"""Exception types shared across the package."""

from __future__ import annotations


class LuxsimError(Exception):
    """Base class for all luxsim-specific failures."""


class SceneFormatError(LuxsimError, ValueError):
    """A document could not be parsed; `where` carries the line or field path."""

    def __init__(self, message: str, where: str | None = None):
        self.where = where
        super().__init__(message if where is None else f"{where}: {message}")


class ValidationError(LuxsimError, ValueError):
    """An entity violates a model invariant; the message names the entity."""


class EmptyGeometryError(LuxsimError, ValueError):
    """An operation that requires geometry received none (or produced none)."""


class SolverError(LuxsimError, RuntimeError):
    """Numeric failure: non-convergence or an inconsistent form-factor matrix."""


class NoObservationError(LuxsimError, ValueError):
    """Albedo estimation found no usable image observation for a patch."""


class NoDepthError(LuxsimError, ValueError):
    """A depth lookup window contained no valid measurement."""


class InfeasibleError(LuxsimError, RuntimeError):
    """A gated dim selection violates the perceived-lux budget."""

    def __init__(self, occupant_id: int, drop: float, budget: float):
        self.occupant_id = occupant_id
        self.drop = drop
        self.budget = budget
        super().__init__(
            f"occupant {occupant_id}: perceived drop {drop:.3f} lux exceeds "
            f"budget {budget:.3f} lux"
        )
