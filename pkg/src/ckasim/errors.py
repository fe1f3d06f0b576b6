"""Exception types shared across the package."""


class CkasimError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(CkasimError, ValueError):
    """An object or argument violates its declared invariants."""


class CapacityError(CkasimError):
    """A dense computation would exceed the configured qubit budget."""


class ConvergenceError(CkasimError):
    """An iterative numerical routine failed to converge.

    Carries the residual reached so callers can report it.
    """

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class EstimationError(CkasimError):
    """A statistical estimate could not be formed (e.g. empty sample)."""


class LpError(CkasimError):
    """The simplex solver gave up; carries the iteration state."""

    def __init__(self, message: str, iterations: int | None = None):
        super().__init__(message)
        self.iterations = iterations
