"""Exception types and status constants shared across the package."""


class IsopulseError(Exception):
    """Base class for all package-specific errors."""


class DomainError(IsopulseError):
    """An argument lies outside the mathematical domain of an operation."""


class StepFailureError(IsopulseError):
    """The adaptive step controller drove the step size below the minimum."""


class DominanceViolatedError(IsopulseError):
    """The leading eigenvalue is complex or the spectral gap is too small."""


class NoConvergenceError(IsopulseError):
    """An iterative root search failed to converge."""


class InfeasibleError(IsopulseError):
    """No admissible pulse exists in the probed bracket."""


class ToleranceNotMetError(IsopulseError):
    """A bisection could not localize its root to the requested width."""


class UnreachableError(IsopulseError):
    """The target level set was not crossed within the time horizon."""


class AnchorInfeasibleError(IsopulseError):
    """No pulse magnitude below the cap reaches the target isostable."""


class NoFeasibleAnchorError(IsopulseError):
    """An anchor lookup found no feasible anchor for the requested channel."""


class EmptyLevelSetError(IsopulseError):
    """No sign change of the sampled eigenfunction at the requested level."""


class RunawayStateError(IsopulseError):
    """Regulation failed: the state left the inflated safety box.

    Carries the partial trajectory and event log so callers can still
    persist diagnostics.
    """

    def __init__(self, message, trajectory=None, events=None):
        super().__init__(message)
        self.trajectory = trajectory
        self.events = events


# Trajectory terminal statuses.
COMPLETED = "completed"
LEFT_DOMAIN = "left_domain"
STEP_FAILURE = "step_failure"

# Eigenfunction sample statuses.
CONVERGED = "converged"
DIVERGED = "diverged"

# Side classification for diverged samples (relative to the state order).
SIDE_BELOW = "below"
SIDE_ABOVE = "above"
SIDE_UNKNOWN = "unknown"
