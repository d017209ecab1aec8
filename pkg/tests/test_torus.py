"""Torus core: eigen-structure, metrics, exact orbits, periods."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from extorus import (
    DeterminantNotOne,
    Direction,
    ExactOrbitState,
    MetricKind,
    NotHyperbolic,
    ShiftSetInsufficient,
    ToralAutomorphism,
    TorusPoint,
    build_automorphism,
    compute_period,
    observable_value,
    step_exact,
    torus_distance,
)
from extorus.torus import DEFAULT_MODULUS, advance_arrays

CAT = build_automorphism(2, 1, 1, 1)
OTHER = build_automorphism(1, 1, 1, 2)


def brute_adapted_distance(z, w, T: ToralAutomorphism, span: int = 3) -> float:
    """Widened-shift oracle: independent eigen solve, shifts in {-span..span}^2."""
    basis = np.array([[T.e_unstable[0], T.e_stable[0]], [T.e_unstable[1], T.e_stable[1]]])
    best = math.inf
    for kx in range(-span, span + 1):
        for ky in range(-span, span + 1):
            v = np.array([z.x - w.x + kx, z.y - w.y + ky])
            xu, xs = np.linalg.solve(basis, v)
            best = min(best, max(abs(xu), abs(xs)))
    return best


class TestBuildAutomorphism:
    def test_cat_map_eigen_structure(self):
        # characteristic polynomial x^2 - 3x + 1, dominant root (3+sqrt5)/2
        assert CAT.lam == pytest.approx((3 + math.sqrt(5)) / 2, rel=1e-14)
        assert CAT.lam * (1 / CAT.lam) == pytest.approx(1.0, abs=1e-14)
        assert math.hypot(*CAT.e_unstable) == pytest.approx(1.0, abs=1e-12)
        assert math.hypot(*CAT.e_stable) == pytest.approx(1.0, abs=1e-12)
        # symmetric matrix: orthogonal eigenvectors, unit basis determinant
        assert CAT.basis_det == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("mat", [(2, 1, 1, 1), (1, 1, 1, 2), (3, 2, 1, 1), (5, 2, 2, 1)])
    def test_eigenvector_property(self, mat):
        T = build_automorphism(*mat)
        a, b, c, d = T.entries
        m = np.array([[a, b], [c, d]], dtype=float)
        for vec, mu in ((T.e_unstable, T.lam), (T.e_stable, 1 / T.lam)):
            assert np.allclose(m @ np.array(vec), mu * np.array(vec), atol=1e-12)
        assert 0.0 < T.basis_det <= 1.0

    def test_rejects_non_hyperbolic(self):
        with pytest.raises(NotHyperbolic):
            build_automorphism(1, 1, 0, 1)

    def test_rejects_wrong_determinant(self):
        with pytest.raises(DeterminantNotOne):
            build_automorphism(2, 0, 0, 2)


class TestStepExact:
    def test_origin_is_fixed(self):
        st0 = ExactOrbitState(0, 0, 977)
        assert step_exact(st0, CAT) == st0
        assert step_exact(st0, OTHER, Direction.BACKWARD) == st0

    def test_small_modulus_example(self):
        out = step_exact(ExactOrbitState(4, 2, 10), CAT)
        assert (out.px, out.py) == (0, 6)

    @given(px=st.integers(0, DEFAULT_MODULUS - 1), py=st.integers(0, DEFAULT_MODULUS - 1))
    @settings(max_examples=200, deadline=None)
    def test_forward_backward_roundtrip(self, px, py):
        state = ExactOrbitState(px, py, DEFAULT_MODULUS)
        back = step_exact(step_exact(state, CAT), CAT, Direction.BACKWARD)
        assert back == state

    def test_roundtrip_bulk(self):
        rng = np.random.default_rng(5)
        px = rng.integers(0, DEFAULT_MODULUS, 10_000)
        py = rng.integers(0, DEFAULT_MODULUS, 10_000)
        fx, fy = advance_arrays(px, py, CAT, DEFAULT_MODULUS)
        bx, by = advance_arrays(fx, fy, CAT, DEFAULT_MODULUS, Direction.BACKWARD)
        assert np.array_equal(bx, px) and np.array_equal(by, py)

    def test_state_validation(self):
        with pytest.raises(ValueError):
            ExactOrbitState(5, 0, 5)
        with pytest.raises(ValueError):
            ExactOrbitState(0, 0, 1)


class TestTorusDistance:
    def test_wraparound(self):
        d = torus_distance(TorusPoint(0.9, 0.0), TorusPoint(0.0, 0.0), CAT, MetricKind.EUCLIDEAN)
        assert d == pytest.approx(0.1, abs=1e-12)

    def test_half_diagonal(self):
        d = torus_distance(TorusPoint(0.5, 0.5), TorusPoint(0.0, 0.0), CAT, MetricKind.EUCLIDEAN)
        assert d == pytest.approx(math.sqrt(0.5), abs=1e-12)

    @pytest.mark.parametrize("metric", list(MetricKind))
    def test_identity(self, metric):
        z = TorusPoint(0.3, 0.7)
        assert torus_distance(z, z, CAT, metric) == 0.0

    def test_adapted_against_widened_shift_oracle(self):
        rng = np.random.default_rng(11)
        for T in (CAT, OTHER):
            checked = 0
            while checked < 300:
                z = TorusPoint(rng.random(), rng.random())
                w = TorusPoint((z.x + 0.3 * (rng.random() - 0.5)) % 1.0,
                               (z.y + 0.3 * (rng.random() - 0.5)) % 1.0)
                oracle = brute_adapted_distance(z, w, T)
                if oracle >= 0.2:
                    continue
                assert torus_distance(z, w, T, MetricKind.ADAPTED) == pytest.approx(
                    oracle, abs=1e-12
                )
                checked += 1

    @pytest.mark.parametrize("metric", list(MetricKind))
    def test_symmetry_triangle_translation(self, metric):
        rng = np.random.default_rng(23)
        for T in (CAT, OTHER):
            for _ in range(200):
                base = rng.random(2)
                pts = [
                    TorusPoint((base[0] + 0.05 * rng.random()) % 1.0,
                               (base[1] + 0.05 * rng.random()) % 1.0)
                    for _ in range(3)
                ]
                z, w, v = pts
                dzw = torus_distance(z, w, T, metric)
                assert dzw == pytest.approx(torus_distance(w, z, T, metric), abs=1e-12)
                assert dzw <= (
                    torus_distance(z, v, T, metric) + torus_distance(v, w, T, metric) + 1e-12
                )
                shift = rng.random(2)
                zs = TorusPoint((z.x + shift[0]) % 1.0, (z.y + shift[1]) % 1.0)
                ws = TorusPoint((w.x + shift[0]) % 1.0, (w.y + shift[1]) % 1.0)
                assert torus_distance(zs, ws, T, metric) == pytest.approx(dzw, abs=1e-12)

    def test_boundary_guard_raises_for_sheared_metric(self):
        # min over shifts sits at (-1, 0) with value well above 0.25
        with pytest.raises(ShiftSetInsufficient):
            torus_distance(TorusPoint(0.55, 0.0), TorusPoint(0.0, 0.0), CAT, MetricKind.ADAPTED)

    def test_euclidean_tie_prefers_interior_shift(self):
        # exact tie between shift (0,0) and boundary shifts: no guard trip
        d = torus_distance(TorusPoint(0.5, 0.0), TorusPoint(0.0, 0.0), CAT, MetricKind.EUCLIDEAN)
        assert d == pytest.approx(0.5, abs=1e-15)


class TestObservable:
    def test_log_inversion(self):
        z = TorusPoint(0.5, 0.5)
        w = TorusPoint(0.5 + math.exp(-4.0), 0.5)
        assert observable_value(w, z, CAT, MetricKind.EUCLIDEAN) == pytest.approx(4.0, abs=1e-12)

    def test_centre_is_infinite(self):
        z = TorusPoint(0.25, 0.75)
        assert observable_value(z, z, CAT, MetricKind.ADAPTED) == math.inf

    @pytest.mark.parametrize("metric", list(MetricKind))
    def test_exceedance_equivalence(self, metric):
        # observable > u iff distance < exp(-u)
        rng = np.random.default_rng(31)
        zeta = TorusPoint(0.3, 0.4)
        for _ in range(10_000):
            z = TorusPoint(rng.random(), rng.random())
            u = 0.5 + 5.5 * rng.random()
            try:
                dist = torus_distance(z, zeta, CAT, metric)
            except ShiftSetInsufficient:
                continue
            obs = math.inf if dist == 0 else -math.log(dist)
            assert (obs > u) == (dist < math.exp(-u))


class TestComputePeriod:
    def test_origin_is_fixed_point(self):
        assert compute_period((0, 0), 1, CAT, 10) == 1

    def test_half_half_period_three(self):
        # independent oracle: exhaustive iteration over the 4 points mod 2
        x, y = 1, 1
        seen = 0
        for k in range(1, 5):
            x, y = (2 * x + y) % 2, (x + y) % 2
            seen = k
            if (x, y) == (1, 1):
                break
        assert seen == 3
        assert compute_period((1, 1), 2, CAT, 100) == 3

    def test_fifth_lattice_point(self):
        # oracle: exhaustive iteration mod 5; period cannot exceed 25
        x, y = 1, 2
        oracle = None
        for k in range(1, 26):
            x, y = (2 * x + y) % 5, (x + y) % 5
            if (x, y) == (1, 2):
                oracle = k
                break
        q = compute_period((1, 2), 5, CAT, 25)
        assert q == oracle
        assert q is not None and q <= 25

    def test_absent_when_capped(self):
        assert compute_period((1, 1), 2, CAT, 2) is None

    def test_validates_numerators(self):
        with pytest.raises(ValueError):
            compute_period((2, 0), 2, CAT, 10)


def test_measure_preservation_statistical():
    """Pushforward of 1e6 uniform exact states stays uniform on a 16x16 grid."""
    rng = np.random.default_rng(99)
    n = 1_000_000
    px = rng.integers(0, DEFAULT_MODULUS, n)
    py = rng.integers(0, DEFAULT_MODULUS, n)
    px, py = advance_arrays(px, py, CAT, DEFAULT_MODULUS, steps=10)
    cells = (px >> 57) * 16 + (py >> 57)  # top 4 bits of each coordinate
    counts = np.bincount(cells, minlength=256)
    p = 1.0 / 256.0
    sigma = math.sqrt(n * p * (1 - p))
    assert np.max(np.abs(counts - n * p)) <= 4.0 * sigma
