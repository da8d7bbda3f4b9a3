"""Error taxonomy shared by all modules.

Exit-code mapping for the CLI: ConfigError -> 2, SizeError -> 3,
everything else that escapes a command -> 1.
"""


class DimredError(Exception):
    """Base class for all package errors."""


class DomainError(DimredError, ValueError):
    """A parameter is outside its admissible range; the message names the field."""


class ConfigError(DimredError):
    """Malformed or inconsistent configuration input."""


class InsufficientDataError(DimredError):
    """An operation needs more points/rows than were supplied."""


class ResolutionError(DimredError):
    """A grid or truncation is too coarse for the requested computation."""


class DegeneracyError(DimredError):
    """The lowest eigenpair is (numerically) degenerate."""


class RegimeError(DimredError):
    """Scale-separation precondition violated (e.g. mu >= epsilon)."""


class ToleranceError(DimredError):
    """An iterative scheme failed to reach its tolerance."""


class InstabilityError(DimredError):
    """A propagation produced NaN/Inf; the message reports the failing step."""


class SizeError(DimredError):
    """A resource cap (basis dimension, grid size) would be exceeded."""
