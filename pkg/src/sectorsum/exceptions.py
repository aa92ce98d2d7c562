"""Exception hierarchy shared by the solver modules."""


class SectorSumError(Exception):
    """Base class for all solver errors."""


class ConfigurationError(SectorSumError, ValueError):
    """Invalid grid sizes, parameters or spectral constants."""


class DomainError(SectorSumError, ValueError):
    """A spectral parameter lies outside the domain of an operation."""


class TruncationError(SectorSumError, ValueError):
    """The half-line truncation point is too small for the tolerance."""


class PreconditionError(SectorSumError, ValueError):
    """Input samples violate the boundary flags an operation requires."""


class IngestionError(SectorSumError, ValueError):
    """Right-hand side data could not be evaluated on the sector."""


class RegionTooSmallError(SectorSumError, RuntimeError):
    """The root scan found fewer roots than requested."""


class EigenvalueProximityError(SectorSumError, ArithmeticError):
    """The spectral parameter is numerically an eigenvalue."""


class SpectralViolationError(SectorSumError, ArithmeticError):
    """The two spectra are not separated."""


class DivergenceError(SectorSumError, ArithmeticError):
    """The fixed-point iteration stopped contracting."""


class TruncationWarning(UserWarning):
    """Exponential tail beyond the grid exceeds the residual tolerance."""


class BoundaryWarning(UserWarning):
    """A field does not vanish at the ends of the t-interval."""
