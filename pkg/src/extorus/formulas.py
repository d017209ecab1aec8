"""Closed-form extreme-value quantities for hyperbolic torus maps.

Everything here is a pure function of (|lam|, q, metric) and the
threshold schedule. Geometry conventions, with s the ball radius and
lam the dominant eigenvalue:

* Thresholds: u_n is chosen so that n times the measure of the ball of
  radius exp(-u_n) around the centre tends to tau. A Euclidean ball of
  radius r has measure pi r^2; an adapted-metric ball is a square in
  eigenbasis coordinates with measure 4 r^2 basis_det.
* Escape region: points of the ball whose first q forward images all
  leave it. Its area is 2 s^2 (asin(L/sqrt(L^2+1)) - asin(1/sqrt(L^2+1)))
  with L = lam^q, and dividing by the ball area pi s^2 gives the
  extremal index for the Euclidean metric. The adapted metric gives
  1 - lam^(-q) instead.
* Return strips: the ball splits into strips Q^kappa of points that
  return to the ball exactly kappa times under the q-fold map before
  escaping. Strip areas have the same arcsin closed form evaluated at
  consecutive indices, the cluster-size law pi(kappa) is a ratio of
  strip areas, and pi(kappa+1)/pi(kappa) -> lam^(-q).
* Counting law: cluster starts arrive as a Poisson stream of intensity
  theta and each cluster carries an integer multiplicity; geometric
  multiplicities give the Polya-Aeppli counting distribution.

The arcsin forms are the primary code path in their well-conditioned
range; algebraically identical atan rearrangements (via
asin(x/sqrt(1+x^2)) = atan(x) and atan(b)-atan(a) =
atan((b-a)/(1+ab))) take over where conditioning or cancellation would
destroy precision. Tests pin each pair together where they overlap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import RadiusTooLarge
from .torus import MetricKind

_TAIL_TOL = 1e-15


@dataclass(frozen=True)
class ThresholdSchedule:
    """Threshold law parameters: limit mean exceedance count and metric."""

    tau: float
    metric: MetricKind
    basis_det: float = 1.0

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if not (0.0 < self.basis_det <= 1.0):
            raise ValueError("basis_det must lie in (0, 1]")


def ball_measure(radius: float, metric: MetricKind, basis_det: float = 1.0) -> float:
    """Lebesgue measure of a metric ball of the given radius."""
    if metric is MetricKind.EUCLIDEAN:
        return math.pi * radius * radius
    return 4.0 * radius * radius * basis_det


def threshold_u_n(n: int, sched: ThresholdSchedule) -> float:
    """Threshold for orbit length n: inverts the ball measure at tau/n.

    Euclidean: u = (1/2) log(pi n / tau). Adapted: u = (1/2)
    log(4 basis_det n / tau). Raises RadiusTooLarge when exp(-u) >= 0.25.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if sched.metric is MetricKind.EUCLIDEAN:
        u = 0.5 * math.log(math.pi * n / sched.tau)
    else:
        u = 0.5 * math.log(4.0 * sched.basis_det * n / sched.tau)
    if math.exp(-u) >= 0.25:
        raise RadiusTooLarge(
            f"threshold radius {math.exp(-u):.4g} >= 0.25 at n={n}, tau={sched.tau}"
        )
    return u


def threshold_radius(n: int, sched: ThresholdSchedule) -> float:
    """exp(-u_n), the exceedance ball radius for the schedule."""
    return math.exp(-threshold_u_n(n, sched))


def radius_s_n(n: int, tau: float) -> float:
    """sqrt(tau / (pi n)); equals the Euclidean threshold radius exactly."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if tau <= 0:
        raise ValueError("tau must be positive")
    return math.sqrt(tau / (math.pi * n))


def kac_rescale(n: int, sched: ThresholdSchedule) -> float:
    """Reciprocal ball measure at the threshold radius.

    u_n inverts the ball area by construction, so the exact value is
    n / tau for both metrics.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    return n / sched.tau


def _power(lam_abs: float, p: float) -> float:
    """lam_abs**p saturating at +inf instead of raising OverflowError."""
    try:
        return lam_abs**p
    except OverflowError:
        return math.inf


def _asin_gap(lam_abs: float, power: float) -> float:
    """asin(L/sqrt(L^2+1)) - asin(1/sqrt(L^2+1)) at L = lam_abs**power.

    The asin form has condition number ~L near its upper limit, so for
    L > 100 the algebraically identical atan form is used instead
    (asin(x/sqrt(1+x^2)) = atan(x)); both paths agree to 1e-15 where
    they overlap.
    """
    big = _power(lam_abs, power)
    if big > 100.0:
        return _atan_gap(lam_abs, power)
    root = math.sqrt(big * big + 1.0)
    return math.asin(big / root) - math.asin(1.0 / root)


def _atan_gap(lam_abs: float, power: float) -> float:
    """atan(lam**p) - atan(lam**-p), identical to _asin_gap."""
    return math.atan(_power(lam_abs, power)) - math.atan(_power(lam_abs, -power))


def _strip_gap(lam_abs: float, q: int, kappa: int) -> float:
    """Angular-gap difference at indices kappa+1 and kappa, stably.

    Exact rearrangement of _asin_gap(lam,(kappa+1)q) - _asin_gap(lam,kq)
    via atan(b)-atan(a) = atan((b-a)/(1+ab)); the direct difference
    cancels to zero in doubles once lam**(kappa*q) exceeds ~1e16.
    """
    lq = _power(lam_abs, q)
    inv_a = _power(lam_abs, -kappa * q)
    big = _power(lam_abs, (kappa + 1) * q)
    expanding = math.atan((lq - 1.0) / (inv_a + big))
    contracting = math.atan(
        (inv_a - _power(lam_abs, -(kappa + 1) * q)) / (1.0 + _power(lam_abs, -(2 * kappa + 1) * q))
    )
    return expanding + contracting


def extremal_index(lam_abs: float, q: int, metric: MetricKind) -> float:
    """Extremal index theta in (0, 1].

    q = 0 encodes a non-periodic centre and gives 1 for both metrics.
    For q >= 1 the Euclidean value is (2/pi) times the angular gap of
    the escape region; the adapted value is 1 - lam_abs**(-q).
    """
    if lam_abs <= 1.0:
        raise ValueError("lam_abs must exceed 1")
    if q < 0:
        raise ValueError("q must be >= 0")
    if q == 0:
        return 1.0
    if metric is MetricKind.EUCLIDEAN:
        return (2.0 / math.pi) * _atan_gap(lam_abs, q)
    return 1.0 - lam_abs ** (-q)


def area_A_q(s: float, lam_abs: float, q: int) -> float:
    """Area of the escape region of a Euclidean ball of radius s.

    Points in the ball whose first q images leave it; the region between
    the ball and its thin preimage ellipse.
    """
    if s <= 0:
        raise ValueError("s must be positive")
    if q < 1:
        raise ValueError("q must be >= 1")
    return 2.0 * s * s * _asin_gap(lam_abs, q)


def strip_area_Q(s: float, lam_abs: float, q: int, kappa: int) -> float:
    """Area of the strip of ball points returning exactly kappa times.

    kappa = 0 is the escape region itself; for kappa >= 1 the area is
    the difference of the angular-gap closed form at indices kappa+1 and
    kappa, scaled by 2 s^2.
    """
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    if kappa == 0:
        return area_A_q(s, lam_abs, q)
    return 2.0 * s * s * _strip_gap(lam_abs, q, kappa)


def nested_area_U(s: float, lam_abs: float, q: int, kappa: int) -> float:
    """Area of the nested set of ball points returning at least kappa times.

    Complement of the first kappa strips inside the ball: pi s^2 minus
    the partial strip sum.
    """
    if kappa < 0:
        raise ValueError("kappa must be >= 0")
    total = math.pi * s * s
    for j in range(kappa):
        total -= strip_area_Q(s, lam_abs, q, j)
    return total


def multiplicity_pi(lam_abs: float, q: int, kappa: int, metric: MetricKind) -> float:
    """Cluster-size probability pi(kappa), kappa >= 1.

    Adapted metric: geometric with parameter theta* = 1 - lam_abs**(-q).
    Euclidean metric: the four-arcsin closed form, equal to the strip
    area ratio (Q^(kappa-1) - Q^kappa) / Q^0.
    """
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    if q < 1:
        raise ValueError("q must be >= 1")
    if metric is MetricKind.ADAPTED:
        theta = 1.0 - lam_abs ** (-q)
        return theta * (1.0 - theta) ** (kappa - 1)
    if _power(lam_abs, kappa * q) <= 1e6:
        # printed grouping: well conditioned while lam^(kq) stays moderate
        low = _asin_gap(lam_abs, (kappa - 1) * q)
        mid = _asin_gap(lam_abs, kappa * q)
        high = _asin_gap(lam_abs, (kappa + 1) * q)
        return (2.0 * mid - low - high) / _asin_gap(lam_abs, q)
    # deep tail: the grouping cancels below the double noise floor, so use
    # the identical strip-gap ratio built from stable differences
    return (_strip_gap(lam_abs, q, kappa - 1) - _strip_gap(lam_abs, q, kappa)) / _strip_gap(
        lam_abs, q, 0
    )


def multiplicity_mass(lam_abs: float, q: int, metric: MetricKind, k_max: int = 4000) -> float:
    """Sum of pi(kappa) up to an adaptive cutoff plus a geometric tail bound.

    The tail ratio tends to lam_abs**(-q), so once terms are below the
    working tolerance the remainder is summed as a geometric series.
    """
    ratio = lam_abs ** (-q)
    total = 0.0
    last = 0.0
    for kappa in range(1, k_max + 1):
        last = multiplicity_pi(lam_abs, q, kappa, metric)
        total += last
        if last < _TAIL_TOL:
            break
    return total + last * ratio / (1.0 - ratio)


def polya_aeppli_pmf(theta: float, t: float, k: int) -> float:
    """Counting pmf for geometric cluster sizes on a window of length t.

    P(N = 0) = exp(-theta t) and for k >= 1

        P(N = k) = exp(-theta t) * sum_{j=1..k} theta^j (1-theta)^(k-j)
                   (theta t)^j / j! * C(k-1, j-1).

    At theta = 1 this reduces to the Poisson pmf with mean t.
    """
    if not (0.0 < theta <= 1.0):
        raise ValueError("theta must lie in (0, 1]")
    if t <= 0:
        raise ValueError("t must be positive")
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return math.exp(-theta * t)
    total = 0.0
    for j in range(1, k + 1):
        total += (
            theta**j
            * (1.0 - theta) ** (k - j)
            * (theta * t) ** j
            / math.factorial(j)
            * math.comb(k - 1, j - 1)
        )
    return math.exp(-theta * t) * total


def wrap_time_g(n: int, lam_abs: float, q: int, tau: float = 1.0) -> int:
    """Number of q-fold backward steps before preimages wrap the torus.

    q = 0: floor((log n - log pi) / (2 log lam)).
    q >= 1: floor((log n + log(lam^(2q)+1) - 2 log(2 lam^q sqrt(tau/pi)))
    / (2 q log lam)), evaluated in a cancellation-free rearrangement so
    large q cannot overflow. Clamped at 0: a negative value would index
    an empty sum.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if lam_abs <= 1.0:
        raise ValueError("lam_abs must exceed 1")
    log_lam = math.log(lam_abs)
    if q == 0:
        value = (math.log(n) - math.log(math.pi)) / (2.0 * log_lam)
    else:
        if tau <= 0:
            raise ValueError("tau must be positive")
        # log(lam^{2q}+1) - 2q log lam = log1p(lam^{-2q})
        numer = math.log(n) + math.log1p(lam_abs ** (-2 * q)) - math.log(4.0 * tau / math.pi)
        value = numer / (2.0 * q * log_lam)
    return max(0, math.floor(value))


@dataclass(frozen=True)
class ExtremalModel:
    """Extremal index plus cluster-size law for one (lam, q, metric)."""

    lam_abs: float
    q: int
    metric: MetricKind
    theta: float

    def multiplicity(self, kappa: int) -> float:
        if kappa < 1:
            raise ValueError("kappa must be >= 1")
        if self.q == 0:
            return 1.0 if kappa == 1 else 0.0
        return multiplicity_pi(self.lam_abs, self.q, kappa, self.metric)

    def multiplicity_table(self, k_max: int) -> list[float]:
        return [self.multiplicity(k) for k in range(1, k_max + 1)]


def extremal_model(lam_abs: float, q: int, metric: MetricKind) -> ExtremalModel:
    """Build and validate an ExtremalModel.

    Checks theta in (0, 1] and, for q >= 1, that the multiplicity law
    sums to 1 within 1e-9 (adaptive cutoff plus geometric tail).
    """
    theta = extremal_index(lam_abs, q, metric)
    if not (0.0 < theta <= 1.0):
        raise ValueError(f"theta = {theta} out of (0, 1]")
    if q >= 1:
        mass = multiplicity_mass(lam_abs, q, metric)
        if abs(mass - 1.0) > 1e-9:
            raise ValueError(f"multiplicity law sums to {mass}, not 1")
    return ExtremalModel(lam_abs, q, metric, theta)


@dataclass(frozen=True)
class CompoundPoissonLaw:
    """Counting law: Poisson(theta t) cluster arrivals with iid sizes.

    `multiplicity` maps kappa >= 1 to a probability. The pmf of the
    window count N([0,t)) is assembled by convolution powers of the size
    law; for geometric sizes it coincides with polya_aeppli_pmf.
    """

    theta: float
    model: ExtremalModel

    def multiplicity(self, kappa: int) -> float:
        return self.model.multiplicity(kappa)

    def pmf_vector(self, t: float, k_max: int) -> np.ndarray:
        """P(N([0,t)) = k) for k = 0..k_max."""
        if t <= 0:
            raise ValueError("t must be positive")
        rate = self.theta * t
        sizes = np.zeros(k_max + 1)
        for kappa in range(1, k_max + 1):
            sizes[kappa] = self.multiplicity(kappa)
        out = np.zeros(k_max + 1)
        conv = np.zeros(k_max + 1)
        conv[0] = 1.0  # zero clusters
        weight = math.exp(-rate)
        out += weight * conv
        j = 0
        while True:
            j += 1
            weight *= rate / j
            nxt = np.zeros(k_max + 1)
            for kappa in range(1, k_max + 1):
                if sizes[kappa] > 0.0:
                    nxt[kappa:] += sizes[kappa] * conv[: k_max + 1 - kappa]
            conv = nxt
            out += weight * conv
            if weight < _TAIL_TOL and j > rate:
                break
        return out
