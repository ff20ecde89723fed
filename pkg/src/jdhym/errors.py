"""Exception taxonomy shared across the package."""


class UsageError(ValueError):
    """Caller passed structurally invalid arguments (shapes, ranges, geometry)."""


class DomainError(ValueError):
    """Arguments are structurally fine but outside the mathematical domain."""


class DataError(ValueError):
    """Field data is corrupt (non-finite values, bad serialization)."""


class NotKahlerError(DomainError):
    """A form that must be positive definite fails somewhere on the grid.

    Carries the offending grid index and the margin found there.
    """

    def __init__(self, message, grid_index=None, margin=None):
        super().__init__(message)
        self.grid_index = grid_index
        self.margin = margin


class EllipticityLostError(DomainError):
    """The linearization is evaluated outside the cone that makes it elliptic."""


class PreconditionError(DomainError):
    """A solve-level hypothesis (integrability, subsolution data) fails."""


class ConeBreachError(RuntimeError):
    """An iterate left the admissible cone and step halving could not recover.

    ``report`` holds the partial solve state when available.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ContinuationError(RuntimeError):
    """A continuity path aborted; records the stage and parameter value."""

    def __init__(self, message, stage, t, cause=None, report=None):
        super().__init__(message)
        self.stage = stage
        self.t = t
        self.cause = cause
        self.report = report


class BranchUndefinedError(DomainError):
    """The intersection polynomial vanishes (or the argument jumps) in range.

    Carries the parameter interval where the branch broke down.
    """

    def __init__(self, message, t_interval=None):
        super().__init__(message)
        self.t_interval = t_interval
