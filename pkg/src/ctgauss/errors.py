"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """A numerical procedure failed its accuracy or stability check."""


class GridTooCoarseError(ValueError):
    """A grid violates the resolution contract of a filtering operation."""


class DeskScaleError(ValueError):
    """A requested computation exceeds the configured desk-scale guards."""
