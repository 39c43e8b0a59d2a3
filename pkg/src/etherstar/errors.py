"""Exception types shared across the library.

Every numerical failure mode gets its own class so callers (and the CLI)
can distinguish "bad input" from "solver gave up" from "you are sitting
on a caustic".
"""


class EtherstarError(Exception):
    """Base class for all library errors."""


class OffManifoldError(EtherstarError):
    """A point failed the manifold membership check."""


class NewtonDiverged(EtherstarError):
    """Newton iteration failed to converge.

    Attributes
    ----------
    iterations : int
        Number of iterations performed.
    residual : float
        Residual norm at the last iterate.
    """

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class FocalTriple(EtherstarError):
    """The midpoint triple sits on the focal set: the fixed-point map of
    the triangle construction has a (near) singular linearization and the
    amplitude determinant vanishes."""


class FocalTime(EtherstarError):
    """The evolution chord construction hit a focal time: the chord
    fixed-point map is (near) singular, the amplitude blows up."""


class ChartDomainError(EtherstarError):
    """A point left the domain of the active chart (sphere: the open
    hemisphere around the chart center)."""


class MembraneChartError(EtherstarError):
    """The triangle membrane does not fit inside a single chart
    (sphere triples spanning more than a hemisphere)."""


class QuadratureError(EtherstarError):
    """Quadrature failed to converge under node doubling / refinement."""


class TruncationError(EtherstarError):
    """Operator-basis truncation is not converged (doubling the basis
    dimension still changes the answer beyond tolerance)."""


class SymbolError(EtherstarError):
    """A symbol object cannot be used as requested: missing decay
    envelope for oscillatory quadrature, or missing derivatives at the
    requested series order."""


class DegreeCapError(EtherstarError):
    """A polynomial operation exceeded the configured degree cap."""


class BranchError(EtherstarError):
    """Requested kernel branch does not exist for this model, or
    continuous branch tracking was interrupted."""


class IntegratorError(EtherstarError):
    """ODE integration diverged or produced non-finite values."""
