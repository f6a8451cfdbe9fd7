"""Exception hierarchy shared by all modules."""


class PerronHJBError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(PerronHJBError, ValueError):
    """Invalid input (bad rates, non-tangent vector, malformed config...)."""


class DegenerateSpectrumError(PerronHJBError):
    """The dominant eigenvalue is not real and simple."""


class UnsupportedSpectrumError(PerronHJBError):
    """The spectrum is complex or defective where a real basis is required."""


class NumericsError(PerronHJBError):
    """Non-finite values, non-convergence or integrator failure."""


class CFLError(NumericsError):
    """Explicit time step violates the monotonicity (CFL) bound."""


class GeometryError(PerronHJBError):
    """A geometric construction (curve, intersection, polygon) failed."""
