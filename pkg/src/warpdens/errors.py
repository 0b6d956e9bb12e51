"""Exception hierarchy shared across the package."""


class WarpdensError(Exception):
    """Base class for all package-specific errors."""


class InvalidWarpError(WarpdensError):
    """A warping function violates monotonicity or endpoint pinning."""


class InvalidSrsfError(WarpdensError):
    """A square-root slope function is degenerate (e.g. zero norm)."""


class DomainError(WarpdensError):
    """An argument lies outside the mathematical domain of an operation."""


class ConstraintError(WarpdensError):
    """A height-ratio vector violates its feasibility constraints."""


class ShapeError(WarpdensError):
    """A density's critical structure does not match the requested shape."""


class DegenerateSampleError(WarpdensError):
    """The sample is too small or has zero spread."""


class OptimizationError(WarpdensError):
    """No optimizer restart produced a finite objective."""
