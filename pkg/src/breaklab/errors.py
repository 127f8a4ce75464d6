"""Exception types shared across the package."""


class BreaklabError(Exception):
    """Base class for all package errors."""


# -- circle arithmetic ------------------------------------------------------

class NotCircularlyOrdered(BreaklabError):
    """Points admit no strictly increasing lift in a single window."""


class DuplicatePoint(BreaklabError):
    """Two points that must be distinct coincide exactly."""


# -- maps -------------------------------------------------------------------

class NotABreakPoint(BreaklabError):
    """Queried location is not a genuine break of the map."""


class IterationBudgetExceeded(BreaklabError):
    """|n| exceeds the configured iteration budget."""


class InfeasibleDescriptor(BreaklabError):
    """No monotone piecewise map satisfies the requested constraints."""


class InvalidMap(BreaklabError):
    """Constructed map failed validation."""


# -- rotation ---------------------------------------------------------------

class BudgetExceeded(BreaklabError):
    """Rotation-number bracketing ran out of budget.

    Carries the best bracket found and an orbit-average fallback estimate.
    """

    def __init__(self, message, bracket=None, estimate=None):
        super().__init__(message)
        self.bracket = bracket
        self.estimate = estimate


class BracketNotFound(BreaklabError):
    """A bisection could not establish a sign-changing bracket."""


# -- partition --------------------------------------------------------------

class InsufficientRhoPrecision(BreaklabError):
    """Rotation number not known precisely enough for the requested level."""


class DegenerateGenerator(BreaklabError):
    """Partition generator collapsed below representable length."""


class BreakOnBoundary(BreaklabError):
    """Break point sits on a partition interval boundary; perturb the base point."""


class BisectionFailed(BreaklabError):
    """Monotone bisection failed to converge."""


# -- cross-ratio ------------------------------------------------------------

class DegenerateQuadruple(BreaklabError):
    """Quadruple has a vanishing gap."""


class BreakInMiddleInterval(BreaklabError):
    """Break lies in the middle interval where no prediction formula applies."""


class MultipleBreaks(BreaklabError):
    """More than one genuine break inside the quadruple span."""


# -- conjugacy / experiments --------------------------------------------------

class RotationMismatch(BreaklabError):
    """Rotation numbers of the two maps do not agree within the gate."""


class ScaleTooFine(BreaklabError):
    """Requested difference-quotient scale is below table resolution."""


class ConstructionOutOfWindow(BreaklabError):
    """Test-quadruple construction exited its renormalization window."""
