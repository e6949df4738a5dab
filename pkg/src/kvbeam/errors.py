"""Exception types shared across the package."""


class KVBeamError(Exception):
    """Base class for package errors."""


class ConfigurationError(KVBeamError, ValueError):
    """Invalid geometry, mesh request or configuration file."""


class AssemblyError(KVBeamError):
    """Assembled matrices fail their definiteness contract."""


class NumericalError(KVBeamError):
    """A linear solve or eigensolve failed."""


class SingularityError(NumericalError):
    """The requested frequency hits the (discrete or exact) spectrum.

    ``eigenvalue`` carries an estimate of the offending eigenvalue.
    """

    def __init__(self, message: str, eigenvalue: complex | None = None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class UnsupportedInputError(KVBeamError, ValueError):
    """Input outside the family a closed-form routine can handle."""


class InsufficientDataError(KVBeamError, ValueError):
    """Too few samples or points for a fit."""


class InvalidDataError(KVBeamError, ValueError):
    """Samples violate a fit's preconditions (e.g. non-positive energies)."""
