"""Exact region membership and an independent Monte Carlo measure oracle.

Regions are subsets of a small metric ball around a centre zeta:

* BALL     - the ball itself, distance(z, zeta) < radius;
* A_Q      - escape region: in the ball, first q forward images outside;
* U_KAPPA  - nested set: images at times 0, q, 2q, ..., kappa*q all inside;
* Q_KAPPA  - strip: in U_KAPPA but not in U_(KAPPA+1).

Membership iterates orbits in exact modular arithmetic (points are
snapped to the 2**61 grid, after which there is no drift) and compares
folded float coordinates against the radius, so decisions are exact up
to a boundary fuzz of one part in 1e16 of the radius.

The measure oracle samples uniformly from the bounding ball rather than
the whole torus, a variance reduction of about 1/(pi r^2), and scales
the hit fraction by the ball area. Sampling is split into fixed-size
chunks whose random streams are keyed by (seed, chunk index); the merged
estimate is a pure function of the seed, independent of how chunks are
assigned to workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .errors import OutOfLocalRange
from .formulas import ball_measure, radius_s_n, wrap_time_g
from .torus import (
    DEFAULT_MODULUS,
    Direction,
    MetricKind,
    ToralAutomorphism,
    TorusPoint,
    advance_arrays,
    folded_offsets,
    int64_safe,
    metric_values,
    wrap_unit,
)

_CHUNK = 1 << 18
_MASK64 = (1 << 64) - 1


class RegionKind(Enum):
    BALL = "ball"
    A_Q = "a_q"
    U_KAPPA = "u_kappa"
    Q_KAPPA = "q_kappa"


@dataclass(frozen=True)
class RegionSpec:
    """A membership-testable region around zeta at a fixed radius."""

    zeta: TorusPoint
    radius: float
    metric: MetricKind
    kind: RegionKind
    q: int = 0
    kappa: int = 0

    def __post_init__(self) -> None:
        if not (0.0 < self.radius < 0.25):
            raise ValueError("radius must lie in (0, 0.25)")
        if self.kind is not RegionKind.BALL and self.q < 1:
            raise ValueError(f"{self.kind.value} requires q >= 1")
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")


def _safe_modulus(T: ToralAutomorphism) -> int:
    """Largest power-of-two modulus keeping int64 row sums overflow-free."""
    bits = 61
    while bits > 32 and not int64_safe(T, 1 << bits):
        bits -= 1
    return 1 << bits


def membership_mask(
    region: RegionSpec,
    T: ToralAutomorphism,
    px: np.ndarray,
    py: np.ndarray,
    modulus: int,
) -> np.ndarray:
    """Vectorised membership of residue-array points in the region."""
    zx, zy = region.zeta.x, region.zeta.y
    r = region.radius

    def in_ball(ax: np.ndarray, ay: np.ndarray) -> np.ndarray:
        dx, dy = folded_offsets(ax, ay, modulus, zx, zy)
        return metric_values(dx, dy, T, region.metric) < r

    mask = in_ball(px, py)
    if region.kind is RegionKind.BALL:
        return mask
    if region.kind is RegionKind.A_Q:
        for _ in range(region.q):
            px, py = advance_arrays(px, py, T, modulus)
            mask &= ~in_ball(px, py)
        return mask
    # U_KAPPA and Q_KAPPA walk the q-fold map
    for _ in range(region.kappa):
        px, py = advance_arrays(px, py, T, modulus, steps=region.q)
        mask &= in_ball(px, py)
    if region.kind is RegionKind.Q_KAPPA:
        px, py = advance_arrays(px, py, T, modulus, steps=region.q)
        mask &= ~in_ball(px, py)
    return mask


def contains(region: RegionSpec, z: TorusPoint, T: ToralAutomorphism) -> bool:
    """Membership of a single point (snapped to the default exact grid)."""
    modulus = min(DEFAULT_MODULUS, _safe_modulus(T))
    px = np.array([round(z.x * modulus) % modulus], dtype=np.int64)
    py = np.array([round(z.y * modulus) % modulus], dtype=np.int64)
    return bool(membership_mask(region, T, px, py, modulus)[0])


def _chunk_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed & _MASK64, index)))


def sample_ball(
    region: RegionSpec,
    T: ToralAutomorphism,
    count: int,
    rng: np.random.Generator,
    modulus: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Uniform sample of `count` grid points from the bounding ball."""
    r = region.radius
    if region.metric is MetricKind.EUCLIDEAN:
        rho = r * np.sqrt(rng.random(count))
        ang = 2.0 * math.pi * rng.random(count)
        ox = rho * np.cos(ang)
        oy = rho * np.sin(ang)
    else:
        xu = r * (2.0 * rng.random(count) - 1.0)
        xs = r * (2.0 * rng.random(count) - 1.0)
        eu, es = T.e_unstable, T.e_stable
        ox = xu * eu[0] + xs * es[0]
        oy = xu * eu[1] + xs * es[1]
    x = (region.zeta.x + ox) % 1.0
    y = (region.zeta.y + oy) % 1.0
    px = np.round(x * modulus).astype(np.int64) % modulus
    py = np.round(y * modulus).astype(np.int64) % modulus
    return px, py


class MeasureEstimate(NamedTuple):
    estimate: float
    std_error: float


def _local_range_guard(region: RegionSpec, T: ToralAutomorphism) -> None:
    if region.kind is RegionKind.BALL:
        return
    depth = {
        RegionKind.A_Q: 1,
        RegionKind.U_KAPPA: max(region.kappa, 1),
        RegionKind.Q_KAPPA: region.kappa + 1,
    }[region.kind]
    if T.lam_abs ** (depth * region.q) * region.radius >= 0.5:
        raise OutOfLocalRange(
            f"lam^({depth}q) * radius >= 1/2: preimages wrap at kappa={region.kappa}"
        )


def _measure_chunk(args: tuple) -> int:
    region, T, seed, index, size, modulus = args
    rng = _chunk_rng(seed, index)
    px, py = sample_ball(region, T, size, rng, modulus)
    return int(np.count_nonzero(membership_mask(region, T, px, py, modulus)))


def monte_carlo_measure(
    region: RegionSpec,
    T: ToralAutomorphism,
    samples: int,
    seed: int,
    workers: int = 1,
) -> MeasureEstimate:
    """Unbiased Monte Carlo estimate of the region's Lebesgue measure.

    Uniform importance sampling over the bounding metric ball scaled by
    the ball area; the standard error is binomial. Deterministic given
    the seed, for any worker count.
    """
    if samples < 1000:
        raise ValueError("samples must be >= 1000")
    _local_range_guard(region, T)
    modulus = min(DEFAULT_MODULUS, _safe_modulus(T))
    sizes = [_CHUNK] * (samples // _CHUNK)
    if samples % _CHUNK:
        sizes.append(samples % _CHUNK)
    jobs = [(region, T, seed, i, size, modulus) for i, size in enumerate(sizes)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            hits = sum(pool.map(_measure_chunk, jobs, chunksize=1))
    else:
        hits = sum(_measure_chunk(job) for job in jobs)
    area = ball_measure(region.radius, region.metric, T.basis_det)
    p = hits / samples
    return MeasureEstimate(area * p, area * math.sqrt(p * (1.0 - p) / samples))


def _verify_periodic(zeta: tuple[Fraction, Fraction], q: int, T: ToralAutomorphism) -> None:
    den = math.lcm(zeta[0].denominator, zeta[1].denominator)
    nx = int(zeta[0] * den) % den
    ny = int(zeta[1] * den) % den
    a, b, c, d = T.entries
    x, y = nx, ny
    for _ in range(q):
        x, y = (a * x + b * y) % den, (c * x + d * y) % den
    if (x, y) != (nx, ny):
        raise ValueError(f"zeta is not periodic with period {q}")


def _zeta_point(zeta: tuple[Fraction, Fraction]) -> TorusPoint:
    # wrap: float() of a fraction just below 1 can round up to 1.0
    return TorusPoint(wrap_unit(float(zeta[0] % 1)), wrap_unit(float(zeta[1] % 1)))


def separation_check(
    T: ToralAutomorphism,
    zeta: tuple[Fraction, Fraction],
    q: int,
    n: int,
    tau: float,
    samples: int,
    seed: int,
    metric: MetricKind = MetricKind.EUCLIDEAN,
    radius_scale: float = 1.0,
) -> bool:
    """True iff no sampled escape-region point returns within the wrap window.

    Samples the escape region at radius s_n (optionally inflated by
    radius_scale as a negative control) and pulls every member backward
    j = 1 .. q*g(n) steps, testing escape-region membership of each
    preimage. The j = 0 term is excluded: the region trivially meets
    itself.
    """
    if samples < 1000:
        raise ValueError("samples must be >= 1000")
    _verify_periodic(zeta, q, T)
    radius = radius_s_n(n, tau) * radius_scale
    region = RegionSpec(_zeta_point(zeta), radius, metric, RegionKind.A_Q, q=q)
    window = q * wrap_time_g(n, T.lam_abs, q, tau)
    modulus = min(DEFAULT_MODULUS, _safe_modulus(T))
    rng = _chunk_rng(seed, 0)
    px, py = sample_ball(region, T, samples, rng, modulus)
    keep = membership_mask(region, T, px, py, modulus)
    px, py = px[keep], py[keep]
    if px.size == 0 or window == 0:
        return True
    return _separation_scan(region, T, px, py, modulus, window)


def _separation_scan(
    region: RegionSpec,
    T: ToralAutomorphism,
    px: np.ndarray,
    py: np.ndarray,
    modulus: int,
    window: int,
) -> bool:
    """Exhaustive check: escape membership of each backward preimage."""
    zx, zy = region.zeta.x, region.zeta.y
    q = region.q

    def in_ball(ax: np.ndarray, ay: np.ndarray) -> np.ndarray:
        dx, dy = folded_offsets(ax, ay, modulus, zx, zy)
        return metric_values(dx, dy, T, region.metric) < region.radius

    # ball masks at times -window .. q relative to the sampled points
    times: dict[int, np.ndarray] = {}
    bx, by = px, py
    times[0] = in_ball(bx, by)
    fx, fy = px, py
    for j in range(1, q + 1):
        fx, fy = advance_arrays(fx, fy, T, modulus)
        times[j] = in_ball(fx, fy)
    for j in range(1, window + 1):
        bx, by = advance_arrays(bx, by, T, modulus, direction=Direction.BACKWARD)
        times[-j] = in_ball(bx, by)
    for j in range(1, window + 1):
        member = times[-j].copy()
        for k in range(1, q + 1):
            member &= ~times[-j + k]
        if bool(np.any(member)):
            return False
    return True


def dprime_sum_diagnostic(
    T: ToralAutomorphism,
    zeta: tuple[Fraction, Fraction],
    q: int,
    n: int,
    j_max: int,
    samples: int,
    seed: int,
    tau: float = 1.0,
    metric: MetricKind = MetricKind.EUCLIDEAN,
) -> float:
    """Monte Carlo estimate of the short-range correlation sum.

    n * sum_{j=1..j_max} m(A cap T^-j A) where A is the escape region
    (the ball itself when q = 0). A decreasing-in-n diagnostic of
    short-return suppression, not a proof.
    """
    if samples < 1000:
        raise ValueError("samples must be >= 1000")
    if j_max < 1:
        raise ValueError("j_max must be >= 1")
    if j_max > math.log(n) ** 5:
        raise ValueError("j_max exceeds the (log n)^5 analysis window")
    radius = radius_s_n(n, tau)
    kind = RegionKind.A_Q if q >= 1 else RegionKind.BALL
    region = RegionSpec(_zeta_point(zeta), radius, metric, kind, q=q)
    modulus = min(DEFAULT_MODULUS, _safe_modulus(T))
    rng = _chunk_rng(seed, 0)
    px, py = sample_ball(region, T, samples, rng, modulus)

    zx, zy = region.zeta.x, region.zeta.y

    def in_ball(ax: np.ndarray, ay: np.ndarray) -> np.ndarray:
        dx, dy = folded_offsets(ax, ay, modulus, zx, zy)
        return metric_values(dx, dy, T, metric) < radius

    # Rolling ball masks: membership of A at forward time j needs the
    # ball masks at times j .. j+q.
    balls = [in_ball(px, py)]
    fx, fy = px, py
    for _ in range(j_max + q):
        fx, fy = advance_arrays(fx, fy, T, modulus)
        balls.append(in_ball(fx, fy))

    def a_mask(t: int) -> np.ndarray:
        out = balls[t].copy()
        for k in range(1, q + 1):
            out &= ~balls[t + k]
        return out

    base = a_mask(0)
    area = ball_measure(radius, metric, T.basis_det)
    total = 0.0
    for j in range(1, j_max + 1):
        hits = int(np.count_nonzero(base & a_mask(j)))
        total += area * hits / samples
    return n * total
