"""Exception types shared across the package."""


class AlexflowError(Exception):
    """Base class for all errors raised by alexflow."""


class InvalidArgument(AlexflowError, ValueError):
    pass


class NonUniqueGeodesic(InvalidArgument):
    """Raised for antipodal pairs on a sphere, where no unique minimal geodesic exists."""


class UnsupportedSpace(AlexflowError, ValueError):
    """The operation needs a curvature bound (or smooth structure) the space lacks."""


class ConvergenceFailure(AlexflowError, RuntimeError):
    """An inner solver hit its iteration cap.

    ``best`` holds the best iterate found and ``residual`` its optimality residual.
    """

    def __init__(self, message, best=None, residual=float("nan")):
        super().__init__(message)
        self.best = best
        self.residual = residual


class OutOfRegionWarning(UserWarning):
    pass
