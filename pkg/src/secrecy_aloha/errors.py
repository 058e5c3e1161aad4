"""Exception types raised by the analysis, optimization and simulation code."""


class SecrecyAlohaError(Exception):
    """Base class for all package errors."""


class ZeroConditioningHits(SecrecyAlohaError):
    """No Monte Carlo sample fell in the conditioning set A(i)."""


class DegenerateCapacity(SecrecyAlohaError):
    """An ergodic capacity estimate is not strictly positive."""


class NoRealRoot(SecrecyAlohaError):
    """The secrecy-threshold quadratic has a negative discriminant."""


class NotApplicable(SecrecyAlohaError):
    """Case classification requested outside N=2 or for an empty joint region."""


class InfeasibleRegion(SecrecyAlohaError):
    """The joint secrecy-stability region is empty."""


class EmptyFeasibleSet(SecrecyAlohaError):
    """No grid point satisfies every secrecy and stability constraint."""


class InsufficientData(SecrecyAlohaError):
    """A queue trajectory is too short for a drift estimate."""
