"""Exception types raised across the package."""


class UdtomoError(Exception):
    """Base class for all package errors."""


class DimensionError(UdtomoError, ValueError):
    pass


class HermiticityError(UdtomoError, ValueError):
    pass


class NormError(UdtomoError, ValueError):
    pass


class FormError(UdtomoError, ValueError):
    pass


class DegenerateParamsError(UdtomoError, ValueError):
    pass


class InvalidDensityError(UdtomoError, ValueError):
    pass


class InfeasibleError(UdtomoError, RuntimeError):
    """No restart produced a feasible point.

    ``best`` holds the attempt with the smallest constraint violation, and
    ``partial`` whatever verdict information was gathered before failing.
    """

    def __init__(self, message, best=None, partial=None):
        super().__init__(message)
        self.best = best
        self.partial = partial
