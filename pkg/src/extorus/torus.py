"""Hyperbolic integer torus maps: eigen-structure, metrics, exact orbits.

A 2x2 integer matrix with determinant 1 and |trace| > 2 induces an
invertible, area-preserving map of the unit torus R^2/Z^2. This module
validates such matrices, exposes their eigen data (dominant eigenvalue,
unit expanding/contracting eigenvectors), the two torus metrics used
throughout the package (plane Euclidean, and the sup metric in the
eigenbasis whose balls are squares aligned with the invariant
directions), exact modular orbit iteration, and period detection for
rational points.

Why exact orbits: floating-point iteration of an expanding linear map
burns through mantissa bits at a rate of log2|lam| per step, so a double
carries usable information for only ~53/log2|lam| iterations. Points
whose coordinates are rationals with a common denominator iterate
exactly in modular integer arithmetic, with no drift at any orbit
length. The default denominator is 2**61; residue orbits at that size
have periods astronomically longer than any simulated orbit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DeterminantNotOne, NotHyperbolic, ShiftSetInsufficient

DEFAULT_MODULUS_BITS = 61
DEFAULT_MODULUS = 1 << DEFAULT_MODULUS_BITS

# Shifts probed when projecting a plane metric to the torus; the zero
# shift comes first so exact ties keep the interior representative.
_SHIFTS = ((0, 0), (-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


class MetricKind(Enum):
    """Torus metric selector."""

    EUCLIDEAN = "euclidean"
    ADAPTED = "adapted"


class Direction(Enum):
    FORWARD = 1
    BACKWARD = -1


@dataclass(frozen=True)
class ToralAutomorphism:
    """Validated integer matrix [[a,b],[c,d]] with its eigen-structure.

    lam is the eigenvalue of largest modulus (|lam| > 1, the two
    eigenvalues multiply to 1). e_unstable / e_stable are unit
    eigenvectors for lam and 1/lam; basis_det is the absolute
    determinant of the matrix whose columns are those eigenvectors,
    which lies in (0, 1] and equals 1 exactly for symmetric matrices.
    """

    a: int
    b: int
    c: int
    d: int
    lam: float
    e_unstable: tuple[float, float]
    e_stable: tuple[float, float]
    basis_det: float

    @property
    def entries(self) -> tuple[int, int, int, int]:
        return (self.a, self.b, self.c, self.d)

    @property
    def inverse_entries(self) -> tuple[int, int, int, int]:
        # determinant 1, so the inverse is integral
        return (self.d, -self.b, -self.c, self.a)

    @property
    def lam_abs(self) -> float:
        return abs(self.lam)

    @property
    def eigen_inverse(self) -> tuple[tuple[float, float], tuple[float, float]]:
        """Rows of the inverse eigenbasis matrix.

        Solving v = xu * e_unstable + xs * e_stable for (xu, xs); used by
        the adapted metric.
        """
        eu, es = self.e_unstable, self.e_stable
        det = eu[0] * es[1] - eu[1] * es[0]
        return ((es[1] / det, -es[0] / det), (-eu[1] / det, eu[0] / det))

    def max_row_sum(self) -> int:
        return max(abs(self.a) + abs(self.b), abs(self.c) + abs(self.d))


@dataclass(frozen=True)
class TorusPoint:
    """A point of the unit torus in local coordinates [0,1) x [0,1)."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.x < 1.0 and 0.0 <= self.y < 1.0):
            raise ValueError(f"torus coordinates must lie in [0,1): ({self.x}, {self.y})")


@dataclass(frozen=True)
class ExactOrbitState:
    """A rational torus point (px/modulus, py/modulus) as residues."""

    px: int
    py: int
    modulus: int

    def __post_init__(self) -> None:
        if self.modulus < 2:
            raise ValueError("modulus must be at least 2")
        if not (0 <= self.px < self.modulus and 0 <= self.py < self.modulus):
            raise ValueError("residues must lie in [0, modulus)")

    def to_point(self) -> TorusPoint:
        return TorusPoint(self.px / self.modulus, self.py / self.modulus)


def wrap_unit(x: float) -> float:
    """Reduce a real number to [0, 1)."""
    x = x % 1.0
    return x if x < 1.0 else 0.0  # x % 1.0 can round up to 1.0


def point(x: float, y: float) -> TorusPoint:
    return TorusPoint(wrap_unit(x), wrap_unit(y))


def exact_state_from_point(z: TorusPoint, modulus: int = DEFAULT_MODULUS) -> ExactOrbitState:
    """Snap a point to the nearest lattice point of the modular grid."""
    return ExactOrbitState(round(z.x * modulus) % modulus, round(z.y * modulus) % modulus, modulus)


def build_automorphism(a: int, b: int, c: int, d: int) -> ToralAutomorphism:
    """Validate an integer matrix and compute its eigen-structure.

    Raises DeterminantNotOne if ad - bc != 1 and NotHyperbolic if
    |a + d| <= 2 (an eigenvalue would sit on the unit circle).
    """
    if a * d - b * c != 1:
        raise DeterminantNotOne(f"determinant is {a * d - b * c}, must be 1")
    tr = a + d
    if abs(tr) <= 2:
        raise NotHyperbolic(f"|trace| = {abs(tr)} <= 2")

    disc = math.sqrt(tr * tr - 4)
    lam = (tr + disc) / 2.0 if tr > 0 else (tr - disc) / 2.0
    other = 1.0 / lam

    def unit_eigenvector(mu: float) -> tuple[float, float]:
        # b and c cannot both vanish here: that would force a*d = 1 with
        # integer a, d and hence |trace| = 2.
        v = (float(b), mu - a) if b != 0 else (mu - d, float(c))
        norm = math.hypot(v[0], v[1])
        return (v[0] / norm, v[1] / norm)

    e_u = unit_eigenvector(lam)
    e_s = unit_eigenvector(other)
    basis_det = abs(e_u[0] * e_s[1] - e_u[1] * e_s[0])
    return ToralAutomorphism(a, b, c, d, lam, e_u, e_s, basis_det)


def step_exact(
    state: ExactOrbitState, T: ToralAutomorphism, direction: Direction = Direction.FORWARD
) -> ExactOrbitState:
    """One exact orbit step in modular integer arithmetic (no rounding)."""
    if direction is Direction.FORWARD:
        a, b, c, d = T.entries
    else:
        a, b, c, d = T.inverse_entries
    m = state.modulus
    return ExactOrbitState((a * state.px + b * state.py) % m, (c * state.px + d * state.py) % m, m)


def _plane_distance(dx: float, dy: float, T: ToralAutomorphism, metric: MetricKind) -> float:
    if metric is MetricKind.EUCLIDEAN:
        return math.hypot(dx, dy)
    (b00, b01), (b10, b11) = T.eigen_inverse
    xu = b00 * dx + b01 * dy
    xs = b10 * dx + b11 * dy
    return max(abs(xu), abs(xs))


def torus_distance(
    z: TorusPoint, w: TorusPoint, T: ToralAutomorphism, metric: MetricKind
) -> float:
    """Distance on the torus: minimum of the plane metric over lattice shifts.

    The search window {-1,0,1}^2 certifies any distance below 0.25 in
    both metrics. If the minimising shift lands on the window boundary
    while the distance exceeds 0.25, a shift outside the window could in
    principle do better for the sheared adapted metric, so
    ShiftSetInsufficient is raised rather than returning a possibly
    non-minimal value.
    """
    dx0 = z.x - w.x
    dy0 = z.y - w.y
    best = math.inf
    best_shift = (0, 0)
    for kx, ky in _SHIFTS:
        dist = _plane_distance(dx0 + kx, dy0 + ky, T, metric)
        if dist < best:
            best = dist
            best_shift = (kx, ky)
    if best > 0.25 and best_shift != (0, 0):
        raise ShiftSetInsufficient(
            f"minimising shift {best_shift} is on the window boundary at distance {best}"
        )
    return best


def observable_value(
    z: TorusPoint, zeta: TorusPoint, T: ToralAutomorphism, metric: MetricKind
) -> float:
    """-log distance to the centre; +inf at the centre itself."""
    dist = torus_distance(z, zeta, T, metric)
    return math.inf if dist == 0.0 else -math.log(dist)


def compute_period(
    zeta_num: tuple[int, int], zeta_den: int, T: ToralAutomorphism, max_period: int
) -> int | None:
    """Least q <= max_period with T^q(zeta) = zeta, or None.

    zeta = (zeta_num[0]/zeta_den, zeta_num[1]/zeta_den) is iterated
    exactly modulo zeta_den; every rational point is periodic, so the
    search fails only when the period exceeds max_period.
    """
    nx, ny = zeta_num
    if not (0 <= nx < zeta_den and 0 <= ny < zeta_den):
        raise ValueError("numerators must satisfy 0 <= num < den")
    a, b, c, d = T.entries
    x, y = nx, ny
    for q in range(1, max_period + 1):
        x, y = (a * x + b * y) % zeta_den, (c * x + d * y) % zeta_den
        if x == nx and y == ny:
            return q
    return None


# ---------------------------------------------------------------------------
# Vectorised helpers shared by the Monte Carlo oracle and the trial engine.
# Residue arrays are int64 when every row sum of |entries| times the modulus
# fits below 2**63; otherwise Python-integer (object dtype) arrays keep the
# arithmetic exact at reduced speed.
# ---------------------------------------------------------------------------


def int64_safe(T: ToralAutomorphism, modulus: int) -> bool:
    return T.max_row_sum() * (modulus - 1) <= np.iinfo(np.int64).max


def residue_dtype(T: ToralAutomorphism, modulus: int) -> object:
    return np.int64 if int64_safe(T, modulus) else object


def advance_arrays(
    px: np.ndarray,
    py: np.ndarray,
    T: ToralAutomorphism,
    modulus: int,
    direction: Direction = Direction.FORWARD,
    steps: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Apply the matrix `steps` times to residue arrays, exactly."""
    a, b, c, d = T.entries if direction is Direction.FORWARD else T.inverse_entries
    for _ in range(steps):
        px, py = (a * px + b * py) % modulus, (c * px + d * py) % modulus
    return px, py


def folded_offsets(
    px: np.ndarray, py: np.ndarray, modulus: int, zx: float, zy: float
) -> tuple[np.ndarray, np.ndarray]:
    """Coordinate offsets from (zx, zy), folded to the nearest image.

    Per-coordinate folding to [-1/2, 1/2] gives the exact Euclidean torus
    distance; for the adapted metric it is exact whenever the resulting
    value is below 0.25 (any representative that small is the folded one).
    """
    inv = 1.0 / modulus
    dx = px.astype(np.float64) * inv - zx
    dy = py.astype(np.float64) * inv - zy
    dx -= np.round(dx)
    dy -= np.round(dy)
    return dx, dy


def metric_values(
    dx: np.ndarray, dy: np.ndarray, T: ToralAutomorphism, metric: MetricKind
) -> np.ndarray:
    """Plane metric of folded offsets (see folded_offsets for validity)."""
    if metric is MetricKind.EUCLIDEAN:
        return np.sqrt(dx * dx + dy * dy)
    (b00, b01), (b10, b11) = T.eigen_inverse
    xu = b00 * dx + b01 * dy
    xs = b10 * dx + b11 * dy
    return np.maximum(np.abs(xu), np.abs(xs))


def draw_residue(rng: np.random.Generator, modulus: int) -> int:
    """Uniform residue in [0, modulus); 128 random bits leave no usable bias."""
    return int.from_bytes(rng.bytes(16), "little") % modulus
