"""Exception types shared across the solver."""


class MeshTopologyError(ValueError):
    """Mesh connectivity violates the conforming-tetrahedra assumptions."""


class MeshFormatError(ValueError):
    """Mesh file could not be parsed; message carries the offending line."""


class DegenerateGeometryError(ValueError):
    """Geometric quantity (volume, gradient stencil, length scale) is singular."""


class SolverConvergenceError(RuntimeError):
    """Iterative solver failed to reach the requested tolerance."""

    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = residual_history


class DivergenceDetectedError(RuntimeError):
    """A state array turned non-finite during time stepping."""


class ZeroDynamicsError(ValueError):
    """Time-step denominator vanished everywhere: nothing to advance."""
