"""Region membership, the Monte Carlo measure oracle, separation, D' sum."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from extorus import (
    MetricKind,
    OutOfLocalRange,
    RegionKind,
    RegionSpec,
    TorusPoint,
    area_A_q,
    build_automorphism,
    contains,
    dprime_sum_diagnostic,
    monte_carlo_measure,
    nested_area_U,
    separation_check,
    strip_area_Q,
    wrap_time_g,
)
from extorus.regions import _safe_modulus, membership_mask, sample_ball
from extorus.torus import advance_arrays

CAT = build_automorphism(2, 1, 1, 1)
ORIGIN = TorusPoint(0.0, 0.0)
S = 0.01


def ball_region(radius=S, metric=MetricKind.EUCLIDEAN, zeta=ORIGIN):
    return RegionSpec(zeta, radius, metric, RegionKind.BALL)


class TestRegionSpec:
    def test_radius_bound(self):
        with pytest.raises(ValueError):
            RegionSpec(ORIGIN, 0.25, MetricKind.EUCLIDEAN, RegionKind.BALL)

    def test_kinds_require_period(self):
        for kind in (RegionKind.A_Q, RegionKind.U_KAPPA, RegionKind.Q_KAPPA):
            with pytest.raises(ValueError):
                RegionSpec(ORIGIN, S, MetricKind.EUCLIDEAN, kind)


class TestContains:
    def test_centre_in_ball_and_nested_sets(self):
        assert contains(ball_region(), ORIGIN, CAT)
        for kappa in range(4):
            region = RegionSpec(
                ORIGIN, S, MetricKind.EUCLIDEAN, RegionKind.U_KAPPA, q=1, kappa=kappa
            )
            assert contains(region, ORIGIN, CAT)

    def test_nested_level_zero_is_ball(self):
        # membership of U at kappa=0 agrees with the plain ball on 1e5 points
        modulus = _safe_modulus(CAT)
        rng = np.random.default_rng(2)
        ball = ball_region()
        u0 = RegionSpec(ORIGIN, S, MetricKind.EUCLIDEAN, RegionKind.U_KAPPA, q=1, kappa=0)
        px, py = sample_ball(ball, CAT, 100_000, rng, modulus)
        # widen: also points outside the ball
        px = np.concatenate([px, rng.integers(0, modulus, 1000)])
        py = np.concatenate([py, rng.integers(0, modulus, 1000)])
        a = membership_mask(ball, CAT, px, py, modulus)
        b = membership_mask(u0, CAT, px, py, modulus)
        assert np.array_equal(a, b)

    def test_strip_partition_is_exact(self):
        # every sampled ball point lies in exactly one strip, kappa <= 60
        modulus = _safe_modulus(CAT)
        rng = np.random.default_rng(3)
        ball = ball_region()
        px, py = sample_ball(ball, CAT, 30_000, rng, modulus)
        inside = membership_mask(ball, CAT, px, py, modulus)
        px, py = px[inside], py[inside]
        counts = np.zeros(px.shape[0], dtype=np.int64)
        for kappa in range(61):
            strip = RegionSpec(
                ORIGIN, S, MetricKind.EUCLIDEAN, RegionKind.Q_KAPPA, q=1, kappa=kappa
            )
            counts += membership_mask(strip, CAT, px, py, modulus).astype(np.int64)
        assert np.all(counts == 1)

    def test_strip_dynamics(self):
        # the q-fold map sends strip kappa+1 onto strip kappa
        modulus = _safe_modulus(CAT)
        rng = np.random.default_rng(4)
        ball = ball_region()
        px, py = sample_ball(ball, CAT, 200_000, rng, modulus)
        q2 = RegionSpec(ORIGIN, S, MetricKind.EUCLIDEAN, RegionKind.Q_KAPPA, q=1, kappa=2)
        member = membership_mask(q2, CAT, px, py, modulus)
        assert member.any()
        fx, fy = advance_arrays(px[member], py[member], CAT, modulus, steps=1)
        q1 = RegionSpec(ORIGIN, S, MetricKind.EUCLIDEAN, RegionKind.Q_KAPPA, q=1, kappa=1)
        assert membership_mask(q1, CAT, fx, fy, modulus).all()


class TestMonteCarloMeasure:
    def test_ball_sanity(self):
        est, se = monte_carlo_measure(ball_region(), CAT, 100_000, 1)
        assert abs(est - math.pi * S * S) <= 3 * se + 1e-12

    def test_escape_region_oracle(self):
        # this is the independent oracle for the escape-area closed form
        region = RegionSpec(ORIGIN, S, MetricKind.EUCLIDEAN, RegionKind.A_Q, q=1)
        est, se = monte_carlo_measure(region, CAT, 1_000_000, 2)
        assert abs(est - area_A_q(S, CAT.lam_abs, 1)) <= 3 * se

    def test_adapted_escape_region(self):
        region = RegionSpec(ORIGIN, 0.005, MetricKind.ADAPTED, RegionKind.A_Q, q=1)
        est, se = monte_carlo_measure(region, CAT, 1_000_000, 3)
        theta = 1.0 - 1.0 / CAT.lam_abs
        ball_area = 4 * 0.005**2 * CAT.basis_det
        assert abs(est - theta * ball_area) <= 3 * se

    @pytest.mark.parametrize("kappa", [1, 2, 3])
    def test_nested_sets_match_strip_complements(self, kappa):
        region = RegionSpec(
            ORIGIN, S, MetricKind.EUCLIDEAN, RegionKind.U_KAPPA, q=1, kappa=kappa
        )
        est, se = monte_carlo_measure(region, CAT, 1_000_000, 4 + kappa)
        assert abs(est - nested_area_U(S, CAT.lam_abs, 1, kappa)) <= 3 * se

    @pytest.mark.parametrize("kappa", [0, 1, 2, 3])
    def test_strips_match_closed_form(self, kappa):
        region = RegionSpec(
            ORIGIN, S, MetricKind.EUCLIDEAN, RegionKind.Q_KAPPA, q=1, kappa=kappa
        )
        est, se = monte_carlo_measure(region, CAT, 1_000_000, 8 + kappa)
        assert abs(est - strip_area_Q(S, CAT.lam_abs, 1, kappa)) <= 3 * se

    @pytest.mark.xfail(
        strict=True,
        reason="configured nested-set tail bound lam^(-kq) s^2 omits the covering "
        "rectangle factor 4: the exact area is 4 s^2 atan(lam^(-kq)), which exceeds "
        "the bound for every kappa; kept as stated and reported honestly",
    )
    def test_nested_tail_bound_as_configured(self):
        for kappa in range(1, 6):
            region = RegionSpec(
                ORIGIN, 0.003, MetricKind.EUCLIDEAN, RegionKind.U_KAPPA, q=1, kappa=kappa
            )
            est, se = monte_carlo_measure(region, CAT, 200_000, 20 + kappa)
            assert est <= CAT.lam_abs ** (-kappa) * 0.003**2 + 3 * se

    def test_strips_partition_ball_measure(self):
        # MC strip measures for kappa 0..3 plus the remaining nested set
        # must recombine into the MC ball measure within combined errors
        total, var = 0.0, 0.0
        for kappa in range(4):
            region = RegionSpec(
                ORIGIN, S, MetricKind.EUCLIDEAN, RegionKind.Q_KAPPA, q=1, kappa=kappa
            )
            est, se = monte_carlo_measure(region, CAT, 400_000, 40 + kappa)
            total += est
            var += se * se
        rest = RegionSpec(ORIGIN, S, MetricKind.EUCLIDEAN, RegionKind.U_KAPPA, q=1, kappa=4)
        est, se = monte_carlo_measure(rest, CAT, 400_000, 44)
        total += est
        var += se * se
        ball_est, ball_se = monte_carlo_measure(ball_region(), CAT, 400_000, 45)
        var += ball_se * ball_se
        assert abs(total - ball_est) <= 3.0 * math.sqrt(var) + 1e-12

    def test_deterministic_and_worker_invariant(self):
        region = RegionSpec(ORIGIN, S, MetricKind.EUCLIDEAN, RegionKind.A_Q, q=1)
        one = monte_carlo_measure(region, CAT, 600_000, 7, workers=1)
        again = monte_carlo_measure(region, CAT, 600_000, 7, workers=1)
        multi = monte_carlo_measure(region, CAT, 600_000, 7, workers=2)
        assert one == again == multi

    def test_error_shrinks_like_sqrt_samples(self):
        small = monte_carlo_measure(
            RegionSpec(ORIGIN, 0.02, MetricKind.EUCLIDEAN, RegionKind.A_Q, q=1),
            CAT, 250_000, 9,
        )
        large = monte_carlo_measure(
            RegionSpec(ORIGIN, 0.02, MetricKind.EUCLIDEAN, RegionKind.A_Q, q=1),
            CAT, 1_000_000, 9,
        )
        assert large.std_error == pytest.approx(small.std_error / 2.0, rel=0.1)

    def test_minimum_samples(self):
        with pytest.raises(ValueError):
            monte_carlo_measure(ball_region(), CAT, 999, 1)

    def test_local_range_guard(self):
        # lam^5 * 0.01 > 1/2: strip 4 wraps, strip 3 is the last local one
        bad = RegionSpec(ORIGIN, S, MetricKind.EUCLIDEAN, RegionKind.Q_KAPPA, q=1, kappa=4)
        with pytest.raises(OutOfLocalRange):
            monte_carlo_measure(bad, CAT, 1000, 1)


class TestSeparation:
    def test_holds_at_fixed_point(self):
        assert separation_check(
            CAT, (Fraction(0), Fraction(0)), 1, 100_000, 1.0, 200_000, 7
        )

    def test_fails_with_inflated_radius(self):
        g = wrap_time_g(100_000, CAT.lam_abs, 1, 1.0)
        assert not separation_check(
            CAT,
            (Fraction(0), Fraction(0)),
            1,
            100_000,
            1.0,
            200_000,
            7,
            radius_scale=CAT.lam_abs**g,
        )

    def test_rejects_non_periodic_claim(self):
        with pytest.raises(ValueError):
            separation_check(CAT, (Fraction(1, 2), Fraction(1, 2)), 1, 10_000, 1.0, 1000, 1)

    def test_period_three_point(self):
        assert separation_check(
            CAT, (Fraction(1, 2), Fraction(1, 2)), 3, 100_000, 1.0, 100_000, 11
        )


class TestDprimeSum:
    def test_zero_within_separation_window(self):
        g = wrap_time_g(100_000, CAT.lam_abs, 1, 1.0)
        est = dprime_sum_diagnostic(
            CAT, (Fraction(0), Fraction(0)), 1, 100_000, g, 200_000, 5
        )
        assert est == 0.0

    def test_decreases_in_n_for_generic_centre(self):
        zeta = (Fraction(math.sqrt(2) - 1), Fraction(math.sqrt(3) - 1))
        small_n = dprime_sum_diagnostic(CAT, zeta, 0, 10**3, 6, 400_000, 12)
        large_n = dprime_sum_diagnostic(CAT, zeta, 0, 10**6, 10, 400_000, 12)
        assert small_n > 0.0
        assert large_n < small_n

    def test_rejects_tiny_sample_counts(self):
        with pytest.raises(ValueError):
            dprime_sum_diagnostic(CAT, (Fraction(0), Fraction(0)), 1, 1000, 2, 0, 1)

    def test_rejects_window_beyond_analysis_range(self):
        with pytest.raises(ValueError):
            dprime_sum_diagnostic(
                CAT, (Fraction(0), Fraction(0)), 1, 1000, 10**6, 2000, 1
            )
