"""Exception types shared across the solver."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration value; message names the key."""


class UnderResolvedGeometryError(RuntimeError):
    """Body features smaller than the local grid spacing (e.g. a face cut twice)."""


class SingularSystemError(RuntimeError):
    """A factorization hit a pivot too small to trust."""


class NonConvergenceError(RuntimeError):
    """Iterative solve ran out of iterations.

    Carries the best relative residual seen and the iteration count so the
    caller can report where the run died.
    """

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
