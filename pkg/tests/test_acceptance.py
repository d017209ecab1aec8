"""Acceptance gate: every exit criterion at its stated tolerance.

The full suite runs once per test session (several minutes of orbit
simulation) and each criterion is asserted from the shared manifest,
printing one pass/fail line per criterion as it completes.

Criterion 2 carries one deliberately faithful sub-check that cannot
pass: the configured nested-set tail bound lam^(-kq) s^2 is exceeded by
the exact intersection area 4 s^2 atan(lam^(-kq)) for every kappa. It is
kept as stated, reported as failed in the manifest, and marked
strict-xfail here; the oracle-equivalence half of the criterion is
asserted separately.
"""

from __future__ import annotations

import math

import pytest

from extorus.acceptance import RunManifest, run_acceptance


@pytest.fixture(scope="module")
def manifest() -> RunManifest:
    return run_acceptance(quick=False, workers=None, progress=print)


@pytest.fixture(scope="module")
def by_id(manifest):
    return {c.cid: c for c in manifest.criteria}


def test_criterion_1_formula_identities(by_id):
    c = by_id[1]
    assert c.measured["ei_area_identity_max_err"] <= 1e-12
    assert c.measured["multiplicity_mass_max_err"] <= 1e-9
    assert c.measured["tail_ratio_max_err"] <= 1e-3
    assert c.measured["ei_limit_q50_max_err"] <= 1e-9
    assert c.measured["pa_sum_max_err"] <= 1e-9
    assert c.measured["pa_mean_max_err"] <= 1e-6
    assert c.passed is True


def test_criterion_2_oracle_equivalence(by_id):
    # closed forms vs the Monte Carlo oracle within 3 standard errors
    assert by_id[2].measured["oracle_equivalence_ok"] is True


@pytest.mark.xfail(
    strict=True,
    reason="nested-set tail bound as configured omits the covering-rectangle factor 4; "
    "the exact area 4 s^2 atan(lam^(-kq)) exceeds lam^(-kq) s^2 for every kappa",
)
def test_criterion_2_nested_tail_bound(by_id):
    assert by_id[2].measured["tail_bound_ok"] is True


def test_criterion_2_failure_is_reported_honestly(by_id):
    # the criterion as a whole includes the unattainable bound and must
    # therefore be recorded as failed, not silently weakened
    assert by_id[2].passed is False


def test_criterion_3_separation(by_id):
    assert by_id[3].measured["separated"] is True
    assert by_id[3].passed is True


def test_criterion_4_nonperiodic_dichotomy(by_id):
    c = by_id[4]
    assert abs(c.measured["p_hat"] - math.exp(-1.0)) <= 0.03
    assert 0.93 <= c.measured["theta_hat_clusters"] <= 1.0
    assert c.measured["ks_p_value"] > 0.01
    assert c.measured["multiplicity_mass_at_1"] >= 0.95
    assert c.passed is True


def test_criterion_5_periodic_euclidean(by_id):
    c = by_id[5]
    theta = c.measured["theta_formula"]
    assert abs(c.measured["p_hat"] - math.exp(-theta)) <= 0.03
    assert abs(c.measured["theta_hat_clusters"] - theta) <= 0.04
    assert abs(c.measured["theta_hat_ratio"] - theta) <= 0.04
    assert c.measured["chi2_p_value"] >= 0.01
    assert c.passed is True


def test_criterion_5_estimators_are_mutually_consistent(by_id):
    # -log(p_hat)/tau and the cluster estimator target the same theta
    c = by_id[5]
    implied = -math.log(c.measured["p_hat"])
    assert abs(implied - c.measured["theta_hat_clusters"]) <= 0.05


def test_criterion_6_periodic_adapted(by_id):
    c = by_id[6]
    assert abs(c.measured["theta_hat_clusters"] - c.measured["theta_formula"]) <= 0.04
    assert c.measured["chi2_p_value"] >= 0.01
    assert c.passed is True


def test_criterion_7_repp_counting_law(by_id):
    c = by_id[7]
    assert c.measured["chi2_p_value"] >= 0.01
    assert c.measured["pa_vs_convolution_max_err"] <= 1e-9
    assert c.passed is True


def test_criterion_8_engineering(by_id):
    c = by_id[8]
    assert c.measured["workers_identical"] is True
    assert c.measured["inverse_identity_ok"] is True
    assert c.measured["suite_wall_time_s"] <= 1800.0
    assert c.passed is True


def test_manifest_lists_every_criterion_once(manifest):
    assert [c.cid for c in manifest.criteria] == list(range(1, 9))


def test_manifest_round_trips_losslessly(manifest):
    assert RunManifest.from_json(manifest.to_json()).to_dict() == manifest.to_dict()
