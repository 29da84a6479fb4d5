"""Exception hierarchy shared by all modules."""


class FlowcentError(Exception):
    """Base class for every error raised by the package."""


class DomainMismatchError(FlowcentError, ValueError):
    """Point or system belongs to a different manifold."""


class InvalidArgumentError(FlowcentError, ValueError):
    """Argument has the wrong shape or a non-finite value."""


class PreconditionError(FlowcentError, ValueError):
    """Documented precondition of an operation does not hold."""


class CalibrationError(FlowcentError, RuntimeError):
    """Local constants could not be certified by the audit."""


class BoundViolationError(FlowcentError, RuntimeError):
    """A certified lower or upper bound failed at an audited point.

    ``where`` carries the offending point (or parameters) when known.
    """

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class DivergenceError(FlowcentError, RuntimeError):
    """Section-time iteration left its admissible interval."""


class NonConvergenceError(FlowcentError, RuntimeError):
    """Iteration hit its cap without meeting the tolerance."""


class WindowNotFoundError(FlowcentError, RuntimeError):
    """Orbit does not leave the ball within the time window."""


class NoMatchError(FlowcentError, RuntimeError):
    """psi_s(x) is not on the local orbit arc of x.

    ``residual`` is the best distance found.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class OffOrbitError(NoMatchError):
    """Normal component of a flowbox inverse exceeds the tolerance."""


class DegenerateBasisError(FlowcentError, ValueError):
    """Orbit vectors are linearly dependent."""


class OutsideChartError(FlowcentError, RuntimeError):
    """Newton inversion of a flowbox chart did not converge."""


class SchemaError(FlowcentError, ValueError):
    """Scenario config does not validate."""
