"""Exception hierarchy shared by all randtree modules."""


class RandTreeError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(RandTreeError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class ConvergenceError(RandTreeError):
    """An iterative solver exhausted its iteration budget."""


class NoConvergence(ConvergenceError):
    """An iterative scheme has no finite limit for these parameters."""


class GridError(RandTreeError, ValueError):
    """A grid function is empty, non-uniform or otherwise unusable."""


class InstabilityError(RandTreeError):
    """A numerical procedure became unstable (grid too coarse, bracketing failed)."""


class NonmonotoneError(RandTreeError):
    """A provably monotone iteration violated monotonicity beyond tolerance."""


class TailNotFlat(RandTreeError):
    """A tail extrapolation is ill-conditioned: the grid horizon is too short."""


class TailNotFlatWarning(UserWarning):
    """Non-fatal variant of :class:`TailNotFlat`."""


class SlowConvergence(ConvergenceError):
    """Convergence is provably too slow to reach the requested tolerance."""


class DegenerateError(RandTreeError):
    """A coefficient equation became singular."""


class ThetaRangeError(RandTreeError, ValueError):
    """Requested value lies outside the attained range of the target function."""


class CapExceeded(RandTreeError):
    """A birth would push the tree volume past the configured vertex cap."""


class NoSaddle(RandTreeError):
    """No interior saddle point exists in the admissible region."""


class InconsistencyError(RandTreeError):
    """Cross-checks between independent computations disagree (numeric fault)."""


class InfeasibleError(RandTreeError):
    """A linear system has no nonnegative solution (infinite means)."""


class ConfigError(RandTreeError, ValueError):
    """An experiment configuration is invalid."""


class ResourceError(RandTreeError):
    """A run was truncated by a resource cap."""


class InsufficientData(RandTreeError):
    """Not enough samples to compute the requested statistic."""
