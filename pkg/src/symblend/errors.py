"""Exception types raised across the package."""


class SymblendError(Exception):
    """Base class for all package errors."""


class RationalDetected(SymblendError):
    """A continued-fraction quotient exceeded the ceiling or the remainder vanished."""


class NewtonDivergence(SymblendError):
    """An implicit map evaluation did not converge."""


class LeftDomain(SymblendError):
    """An orbit left the annulus |J| <= 1."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class RegimeViolation(SymblendError):
    """Parameters lie outside the validity range of an approximation."""


class NotHyperbolic(SymblendError):
    """A matrix expected to be hyperbolic has trace <= 2."""


class RegimeInfeasible(SymblendError):
    """A requested regime fails one of its defining inequalities."""

    def __init__(self, message, inequality=None):
        super().__init__(message)
        self.inequality = inequality


class SmallDivisorBlowup(SymblendError):
    """A homological denominator fell below the admissible floor."""


class NoTransverseZero(SymblendError):
    """A kick function has no simple zero near the expected angle."""


class ContractionFailure(SymblendError):
    """A graph transform stopped contracting at the predicted rate."""


class SearchExhausted(SymblendError):
    """A word search reached its depth limit without success."""


class NoHeteroclinic(SymblendError):
    """No transverse crossing between the two invariant curves was found."""


class SteeringStuck(SymblendError):
    """The steering controller made no progress within its step budget."""


class WindowTooShort(SymblendError):
    """A symbol window is too short for the requested composition."""


class NearCollision(SymblendError):
    """The test particle came too close to a primary."""


class StepUnderflow(SymblendError):
    """The adaptive integrator step size underflowed."""


class BudgetExhausted(SymblendError):
    """An orbit search used up its evaluation budget."""
