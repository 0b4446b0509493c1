"""Custom errors for Thermbound."""


class ThermboundError(Exception):
    """Base Thermbound exception."""


class ThermboundInputError(ThermboundError):
    """Raised when an operation receives input outside its contract."""


class ThermboundCapabilityError(ThermboundError):
    """Raised when a documented size limit is exceeded."""


class ThermboundConvergenceError(ThermboundError):
    """Raised when the eigensolver fails or its residual is too large."""

    def __init__(self, message: str, *, residual: float | None = None) -> None:
        super().__init__(message)
        self.residual = residual


class ThermboundSymmetryError(ThermboundError):
    """Raised when a symmetry precondition does not hold."""

    def __init__(
        self,
        message: str,
        *,
        hamiltonian_defect: float,
        observable_defect: float,
    ) -> None:
        super().__init__(message)
        self.hamiltonian_defect = hamiltonian_defect
        self.observable_defect = observable_defect


class ThermboundNumericsError(ThermboundError):
    """Raised when a numerical invariant is violated at run time."""


class ThermboundConfigError(ThermboundError):
    """Raised when configuration is invalid or missing."""


class ThermboundCacheError(ThermboundError):
    """Raised when the spectrum cache cannot be read or written."""
