"""Exception hierarchy shared by the solver modules."""


class NareError(Exception):
    """Base class for all errors raised by :mod:`nare_radi`."""


class ShiftError(NareError):
    """A shift pair cannot be used; callers are expected to try another."""


class SingularShift(ShiftError):
    """The shifted matrix has an exactly zero pivot."""


class IllConditionedShift(ShiftError):
    """The shifted matrix is too ill-conditioned to be trusted."""

    def __init__(self, message, cond_estimate=None):
        super().__init__(message)
        self.cond_estimate = cond_estimate


class SingularUpsilon(ShiftError):
    """The small core matrix of a RADI step could not be factorized."""


class DegeneratePsi(ShiftError):
    """The 2x2 weighting matrix of a conjugate double step is undefined."""


class AssumptionViolated(NareError):
    """A matrix required to be nonsingular for the chosen shift is singular."""

    def __init__(self, name):
        super().__init__(f"{name} is singular")
        self.name = name


class IterationBreakdown(NareError):
    """A dense fixed-point recurrence hit a singular intermediate matrix."""

    def __init__(self, step, message="I - G X is numerically singular"):
        super().__init__(f"breakdown at step {step}: {message}")
        self.step = step


class NoSplitting(NareError):
    """The Hamiltonian has eigenvalues on (or too close to) the imaginary axis."""


class SingularBasis(NareError):
    """The leading block of an invariant-subspace basis is singular."""


class PoleHit(NareError):
    """A rational function was evaluated at one of its poles."""


class EmptyCandidates(NareError):
    """No shift candidates are available on one side of the imaginary axis."""


class RankDeficientWindow(NareError):
    """The projection window does not have full column rank."""


class NoValidShift(NareError):
    """Every candidate shift was rejected by the validity probe."""


class SizeGuardError(NareError):
    """Refusing to materialize a dense matrix that is too large."""
