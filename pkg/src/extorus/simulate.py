"""Monte Carlo orbit experiments and empirical extreme-value estimators.

A trial draws a uniform random exact initial state, iterates the torus
map for n steps in modular integer arithmetic, and records the times and
observable values of every entry into the threshold ball together with
the block maximum of the observable. Trials are bit-reproducible: the
random stream of trial k is keyed by (seed, k), so any partition of the
trial range across workers produces identical records.

On top of the raw records sit the standard estimators: block-maxima CDF
at the threshold, runs declustering, cluster-count extremal index,
cluster-size histograms, rescaled inter-cluster gap Kolmogorov-Smirnov
statistics, window counting distributions, and the measure-ratio
extremal index backed by the region oracle.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np
from scipy import special, stats

from .errors import NoExceedances, TooFewGaps
from .formulas import ThresholdSchedule, kac_rescale, threshold_u_n, wrap_time_g
from .regions import RegionKind, RegionSpec, monte_carlo_measure
from .torus import (
    MetricKind,
    ToralAutomorphism,
    TorusPoint,
    build_automorphism,
    compute_period,
    draw_residue,
    int64_safe,
    wrap_unit,
)

# Observable value reported for an exact hit of the centre; -log of the
# smallest positive double, so records stay free of infinities.
OBSERVABLE_CAP = 745.0

_MASK64 = (1 << 64) - 1
_TRIAL_CHUNK = 1024
_PERIOD_DEN_LIMIT = 1_000_000
_PERIOD_SEARCH_LIMIT = 1_000_000


def resolve_workers(explicit: int | None = None) -> int:
    """Worker count: explicit argument, else EXTORUS_THREADS, else cores."""
    if explicit is not None:
        return max(1, explicit)
    env = os.environ.get("EXTORUS_THREADS")
    if env:
        return max(1, int(env))
    return min(os.cpu_count() or 1, 8)


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one simulation experiment.

    zeta is a pair of exact fractions; floats convert exactly, so a
    decimal centre is the rational point the double denotes. The period
    q is auto-detected for denominators up to 1e6 and taken as 0
    (effectively non-periodic) otherwise.
    """

    matrix: tuple[int, int, int, int] = (2, 1, 1, 1)
    zeta: tuple[Fraction, Fraction] = (Fraction(0), Fraction(0))
    metric: MetricKind = MetricKind.EUCLIDEAN
    tau: float = 1.0
    n: int = 100_000
    trials: int = 1000
    modulus_bits: int = 61
    seed: int = 1
    run_gap: int | None = None

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not (32 <= self.modulus_bits <= 128):
            raise ValueError("modulus_bits must lie in [32, 128]")
        if self.run_gap is not None and self.run_gap < 1:
            raise ValueError("run_gap must be positive")
        object.__setattr__(self, "zeta", (Fraction(self.zeta[0]) % 1, Fraction(self.zeta[1]) % 1))
        self.radius  # validates tau > 0, matrix, and radius < 0.25

    @cached_property
    def automorphism(self) -> ToralAutomorphism:
        return build_automorphism(*self.matrix)

    @property
    def modulus(self) -> int:
        return 1 << self.modulus_bits

    @cached_property
    def schedule(self) -> ThresholdSchedule:
        return ThresholdSchedule(self.tau, self.metric, self.automorphism.basis_det)

    @cached_property
    def u_n(self) -> float:
        return threshold_u_n(self.n, self.schedule)

    @cached_property
    def radius(self) -> float:
        return math.exp(-self.u_n)

    @cached_property
    def v_n(self) -> float:
        return kac_rescale(self.n, self.schedule)

    @cached_property
    def q(self) -> int:
        """Detected period of zeta (0 when none found within the cap)."""
        den = math.lcm(self.zeta[0].denominator, self.zeta[1].denominator)
        if den > _PERIOD_DEN_LIMIT:
            return 0
        nums = (int(self.zeta[0] * den) % den, int(self.zeta[1] * den) % den)
        cap = min(den * den, _PERIOD_SEARCH_LIMIT)
        return compute_period(nums, den, self.automorphism, cap) or 0

    @cached_property
    def g_n(self) -> int:
        return wrap_time_g(self.n, self.automorphism.lam_abs, self.q, self.tau)

    @cached_property
    def run_gap_effective(self) -> int:
        """Declustering gap: q*g(n) for periodic centres, g(n) otherwise."""
        if self.run_gap is not None:
            return self.run_gap
        gap = self.q * self.g_n if self.q >= 1 else self.g_n
        return max(gap, 1)

    @property
    def zeta_floats(self) -> tuple[float, float]:
        # wrap: float() of a fraction just below 1 can round up to 1.0
        return (wrap_unit(float(self.zeta[0])), wrap_unit(float(self.zeta[1])))


@dataclass(frozen=True)
class TrialRecord:
    """Exceedance times/values and the block maximum of one orbit."""

    trial_id: int
    exceedance_times: tuple[int, ...]
    exceedance_values: tuple[float, ...]
    block_maximum: float


@dataclass(frozen=True)
class ClusterSummary:
    """Declustered view of one trial, in Kac-rescaled time units."""

    cluster_sizes: tuple[int, ...]
    inter_cluster_gaps: tuple[float, ...]
    cluster_times: tuple[float, ...]


def _initial_states(cfg: ExperimentConfig, trial_ids) -> tuple[list[int], list[int]]:
    pxs, pys = [], []
    for tid in trial_ids:
        rng = np.random.default_rng(np.random.SeedSequence((cfg.seed & _MASK64, int(tid))))
        pxs.append(draw_residue(rng, cfg.modulus))
        pys.append(draw_residue(rng, cfg.modulus))
    return pxs, pys


def _simulate_chunk(
    cfg: ExperimentConfig,
    trial_ids: list[int],
    initial_states: list[tuple[int, int]] | None = None,
) -> list[TrialRecord]:
    """Lockstep-vectorised orbits for a batch of trials."""
    T = cfg.automorphism
    modulus = cfg.modulus
    euclid = cfg.metric is MetricKind.EUCLIDEAN
    zx, zy = cfg.zeta_floats
    r = cfg.radius
    r2 = r * r
    inv = 1.0 / modulus
    a, b, c, d = T.entries
    dtype = np.int64 if int64_safe(T, modulus) else object

    if initial_states is None:
        pxs, pys = _initial_states(cfg, trial_ids)
    else:
        pxs = [s[0] for s in initial_states]
        pys = [s[1] for s in initial_states]
    px = np.array(pxs, dtype=dtype)
    py = np.array(pys, dtype=dtype)

    width = len(trial_ids)
    times: list[list[int]] = [[] for _ in range(width)]
    values: list[list[float]] = [[] for _ in range(width)]
    best = np.full(width, np.inf)

    if not euclid:
        (b00, b01), (b10, b11) = T.eigen_inverse

    for step in range(cfg.n):
        dx = px.astype(np.float64) * inv - zx
        dy = py.astype(np.float64) * inv - zy
        dx -= np.round(dx)
        dy -= np.round(dy)
        if euclid:
            dist = dx * dx + dy * dy  # squared
            hits = dist < r2
        else:
            xu = b00 * dx + b01 * dy
            xs = b10 * dx + b11 * dy
            dist = np.maximum(np.abs(xu), np.abs(xs))
            hits = dist < r
        np.minimum(best, dist, out=best)
        if hits.any():
            for i in np.nonzero(hits)[0]:
                dv = float(dist[i])
                if dv == 0.0:
                    val = OBSERVABLE_CAP
                else:
                    val = -0.5 * math.log(dv) if euclid else -math.log(dv)
                times[i].append(step)
                values[i].append(val)
        if step + 1 < cfg.n:
            px, py = (a * px + b * py) % modulus, (c * px + d * py) % modulus

    records = []
    for i, tid in enumerate(trial_ids):
        m = float(best[i])
        if m == 0.0:
            block_max = OBSERVABLE_CAP
        else:
            block_max = -0.5 * math.log(m) if euclid else -math.log(m)
        records.append(TrialRecord(int(tid), tuple(times[i]), tuple(values[i]), block_max))
    return records


def run_trial(
    cfg: ExperimentConfig, trial_id: int, initial_state: tuple[int, int] | None = None
) -> TrialRecord:
    """One orbit; the optional initial_state override is for diagnostics."""
    states = [initial_state] if initial_state is not None else None
    return _simulate_chunk(cfg, [trial_id], states)[0]


def _chunk_job(args: tuple) -> list[TrialRecord]:
    cfg, ids = args
    return _simulate_chunk(cfg, ids)


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> list[TrialRecord]:
    """All trials of the experiment, ordered by trial id.

    Records are a pure function of (cfg, trial_id); the worker count
    only changes how chunks are scheduled.
    """
    workers = resolve_workers(workers)
    ids = list(range(cfg.trials))
    chunks = [ids[i : i + _TRIAL_CHUNK] for i in range(0, len(ids), _TRIAL_CHUNK)]
    if workers == 1 or len(chunks) == 1:
        out: list[TrialRecord] = []
        for chunk in chunks:
            out.extend(_simulate_chunk(cfg, chunk))
        return out
    with ProcessPoolExecutor(max_workers=min(workers, len(chunks))) as pool:
        parts = list(pool.map(_chunk_job, [(cfg, chunk) for chunk in chunks]))
    return [rec for part in parts for rec in part]


def estimate_block_maxima_cdf(
    cfg: ExperimentConfig,
    records: list[TrialRecord] | None = None,
    workers: int | None = None,
) -> tuple[float, float]:
    """Fraction of trials whose block maximum stays at or below u_n."""
    if cfg.trials < 100:
        raise ValueError("need at least 100 trials")
    if records is None:
        records = run_experiment(cfg, workers)
    u = cfg.u_n
    p = sum(1 for rec in records if rec.block_maximum <= u) / len(records)
    return p, math.sqrt(p * (1.0 - p) / len(records))


def decluster(record: TrialRecord, run_gap: int, v_n: float) -> ClusterSummary:
    """Runs declustering: exceedances within run_gap raw steps share a cluster.

    A cluster's time is its first exceedance time divided by v_n; gaps
    are differences of consecutive cluster times within the record.
    """
    if run_gap < 1:
        raise ValueError("run_gap must be positive")
    if v_n <= 0:
        raise ValueError("v_n must be positive")
    times = record.exceedance_times
    if not times:
        return ClusterSummary((), (), ())
    sizes: list[int] = []
    starts: list[int] = []
    current = 1
    start = times[0]
    for prev, cur in zip(times, times[1:]):
        if cur - prev <= run_gap:
            current += 1
        else:
            sizes.append(current)
            starts.append(start)
            current = 1
            start = cur
    sizes.append(current)
    starts.append(start)
    cluster_times = tuple(s / v_n for s in starts)
    gaps = tuple(t1 - t0 for t0, t1 in zip(cluster_times, cluster_times[1:]))
    return ClusterSummary(tuple(sizes), gaps, cluster_times)


def decluster_all(
    records: list[TrialRecord], run_gap: int, v_n: float
) -> list[ClusterSummary]:
    return [decluster(rec, run_gap, v_n) for rec in records]


def empirical_extremal_index(summaries: list[ClusterSummary]) -> float:
    """Pooled clusters over pooled exceedances; the reciprocal mean cluster size."""
    clusters = sum(len(s.cluster_sizes) for s in summaries)
    exceedances = sum(sum(s.cluster_sizes) for s in summaries)
    if exceedances == 0:
        raise NoExceedances("no exceedances across the supplied summaries")
    return clusters / exceedances


def empirical_multiplicity(summaries: list[ClusterSummary]) -> dict[int, float]:
    """Normalised histogram of cluster sizes."""
    counts: dict[int, int] = {}
    total = 0
    for s in summaries:
        for size in s.cluster_sizes:
            counts[size] = counts.get(size, 0) + 1
            total += 1
    if total == 0:
        raise NoExceedances("no clusters across the supplied summaries")
    return {k: v / total for k, v in sorted(counts.items())}


def pooled_gaps(summaries: list[ClusterSummary], window_span: float | None = None) -> np.ndarray:
    """Inter-cluster gaps pooled across trials.

    With window_span given, trials are glued end to end on the rescaled
    timeline (trial i offset by i * window_span) and gaps are taken on
    the glued stream, which keeps the gap law exponential across trial
    boundaries; otherwise the per-trial gaps are simply concatenated.
    """
    if window_span is None:
        return np.concatenate([np.asarray(s.inter_cluster_gaps) for s in summaries] or [[]])
    glued: list[float] = []
    for i, s in enumerate(summaries):
        offset = i * window_span
        glued.extend(t + offset for t in s.cluster_times)
    arr = np.asarray(glued)
    return np.diff(arr) if arr.size else arr


def gap_ks_statistic(
    summaries: list[ClusterSummary],
    theta: float,
    window_span: float | None = None,
) -> tuple[float, float]:
    """KS distance of pooled gaps against Exponential(rate=theta).

    The p-value uses the asymptotic Kolmogorov distribution; adequate
    for 1% decisions at twenty or more gaps.
    """
    gaps = pooled_gaps(summaries, window_span)
    if gaps.size < 20:
        raise TooFewGaps(f"{gaps.size} gaps, need >= 20")
    x = np.sort(gaps)
    cdf = 1.0 - np.exp(-theta * x)
    n = x.size
    hi = np.arange(1, n + 1) / n
    lo = np.arange(0, n) / n
    ks = float(max(np.max(hi - cdf), np.max(cdf - lo)))
    return ks, float(special.kolmogorov(math.sqrt(n) * ks))


def repp_counts(records: list[TrialRecord], horizon_steps: int) -> np.ndarray:
    """Exceedance counts per trial within the first horizon_steps steps."""
    return np.array(
        [sum(1 for t in rec.exceedance_times if t < horizon_steps) for rec in records],
        dtype=np.int64,
    )


def chi_square_vs_pmf(
    values,
    pmf,
    k_min: int,
    k_max: int,
    min_expected: float = 5.0,
) -> tuple[float, float, int]:
    """Chi-square GOF of observed integers against a pmf with a pooled tail.

    Bins are k_min..k_max individually plus one bin for values above
    k_max (the pmf mass below k_min also lands in the pooled bin, for
    size laws that start at 1). Bins with expectation under min_expected
    are merged into their left neighbour. Returns (statistic, p_value,
    degrees of freedom).
    """
    data = np.asarray(values, dtype=np.int64)
    n = data.size
    if n == 0:
        raise ValueError("no observations")
    obs = [float(np.count_nonzero(data == k)) for k in range(k_min, k_max + 1)]
    obs.append(float(np.count_nonzero(data > k_max)))
    probs = [pmf(k) for k in range(k_min, k_max + 1)]
    probs.append(max(1.0 - math.fsum(probs), 0.0))
    exp = [p * n for p in probs]
    i = len(exp) - 1
    while i > 0:
        if exp[i] < min_expected:
            exp[i - 1] += exp[i]
            obs[i - 1] += obs[i]
            del exp[i], obs[i]
        i -= 1
    if len(exp) < 2:
        raise ValueError("too few bins with adequate expectation")
    stat = float(sum((o - e) ** 2 / e for o, e in zip(obs, exp)))
    dof = len(exp) - 1
    return stat, float(stats.chi2.sf(stat, dof)), dof


def ei_measure_ratio(
    cfg: ExperimentConfig, samples: int, seed: int, workers: int = 1
) -> float:
    """Extremal index as the oracle measure ratio escape-region / ball.

    An independent path to theta: two Monte Carlo measures at the
    threshold radius. By convention the ratio is 1 for q = 0, where the
    escape region is the ball itself.
    """
    if cfg.q == 0:
        return 1.0
    T = cfg.automorphism
    zeta = TorusPoint(*cfg.zeta_floats)
    ball = RegionSpec(zeta, cfg.radius, cfg.metric, RegionKind.BALL)
    escape = RegionSpec(zeta, cfg.radius, cfg.metric, RegionKind.A_Q, q=cfg.q)
    num = monte_carlo_measure(escape, T, samples, seed, workers)
    den = monte_carlo_measure(ball, T, samples, seed + 1, workers)
    return num.estimate / den.estimate
