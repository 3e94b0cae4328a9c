"""Exception types raised by the solver pipeline."""


class CDGError(Exception):
    """Base class for every error raised by this package."""


class OutsideNeighborhood(CDGError, ValueError):
    """A point lies outside the tubular neighborhood where the closest-point map is unique."""


class AxisPoint(OutsideNeighborhood):
    """A point lies on the symmetry axis of a torus."""


class NonPositiveMeasure(CDGError, ValueError):
    pass


class DegenerateFace(CDGError, ValueError):
    pass


class DegenerateTriangle(CDGError, ValueError):
    pass


class NonManifoldEdge(CDGError, ValueError):
    pass


class SolverBreakdown(CDGError, RuntimeError):
    pass


class NonPositive(CDGError, ValueError):
    """Errors passed to a rate estimate must be strictly positive."""
