"""Semantic exception hierarchy for extorus."""


class ExtorusError(Exception):
    """Base class for all extorus errors."""


class DeterminantNotOne(ExtorusError):
    """The integer matrix does not have determinant one."""


class NotHyperbolic(ExtorusError):
    """The integer matrix has an eigenvalue on the unit circle (|trace| <= 2)."""


class ShiftSetInsufficient(ExtorusError):
    """The lattice-shift search window cannot certify the torus distance.

    Raised when the minimising shift lies on the boundary of the
    {-1,0,1}^2 window and the resulting distance exceeds 0.25, so a wider
    window might produce a smaller value (sheared eigenbasis metrics only;
    every distance below 0.25 is certified exact).
    """


class RadiusTooLarge(ExtorusError):
    """The threshold radius is >= 0.25, so the ball is not locally planar."""


class OutOfLocalRange(ExtorusError):
    """A nested-region index exceeds the range where preimages stay local.

    Beyond lam**((kappa+1)*q) * radius < 1/2 the relevant preimage wraps
    around the torus and the closed-form strip geometry no longer applies.
    """


class NoExceedances(ExtorusError):
    """An estimator was asked to run on data with no threshold exceedances."""


class TooFewGaps(ExtorusError):
    """Fewer than the minimum number of inter-cluster gaps for the KS test."""
