"""Exception types shared across the package (mapped to CLI exit codes)."""


class ConfigurationError(ValueError):
    """Invalid parameters, grids or run configuration (exit code 2)."""


class PhysicsCheckError(RuntimeError):
    """A verified inequality or bracket failed (exit code 3)."""


class NumericalError(RuntimeError):
    """Solver non-convergence or internal inconsistency (exit code 4)."""

    def __init__(self, message, best_residual=None):
        super().__init__(message)
        self.best_residual = best_residual
