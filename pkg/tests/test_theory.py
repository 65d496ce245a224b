# tests/test_theory.py
import itertools
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from errors import EnumerationBudgetError, InvalidArgumentError, NoPositiveRootError
from experiments import gen_cosparse_problem
from models import MeasurementProblem, SolverConfig, Variant
from operators import Cosupport, make_1d_dif
from projection import CosupportProjector
from solvers import asp
from theory import (
    acosamp_report, aiht_delta_boundary, aiht_report, asp_report, best_cosparse_approximation,
    boundary_table, delta_root_acosamp, delta_root_asp, estimate_sigma_sq,
    general_position_corank_log_count, nonexact_bound, omega_rip_corank_exhaustive,
    omega_rip_exhaustive, omega_rip_sampled, projected_operator_norm, rip_deviation,
    sample_bound_corank, sample_bound_cosparsity,
)


# ── Feasibility boundaries ──────────────────────────────
def test_aiht_boundary_at_exact_projection():
    assert aiht_delta_boundary(1.0, 5.0) == pytest.approx(1 / 3, abs=1e-6)


def test_aiht_boundary_shrinks_with_C():
    assert aiht_delta_boundary(1.05, 5.0) == pytest.approx(0.2896, abs=5e-4)
    assert aiht_delta_boundary(1.1, 5.0) == pytest.approx(0.2406, abs=5e-4)


def test_delta_roots():
    assert delta_root_acosamp(1.0, 5.0, 1e-3) == pytest.approx(0.01630, abs=5e-5)
    assert delta_root_acosamp(1.05, 5.0, 1e-3) == pytest.approx(0.00496, abs=5e-5)
    assert delta_root_acosamp(1.1, 5.0, 1e-3) == pytest.approx(0.000312, abs=5e-6)
    assert delta_root_asp(1.0, 5.0, 1e-3) == pytest.approx(0.0155295, abs=2e-6)
    # the ASP quadratic is linear at C=1, gamma=0 with root sqrt(delta) = 1/8
    assert delta_root_asp(1.0, 5.0, 0.0) == pytest.approx(1 / 64, abs=1e-12)


def test_no_positive_root():
    with pytest.raises(NoPositiveRootError):
        delta_root_acosamp(2.0, 5.0, 1e-3)


def test_boundary_table_rows():
    rows = boundary_table()
    assert [row["C"] for row in rows] == [1.0, 1.05, 1.1]
    aiht = [row["aiht"] for row in rows]
    assert aiht == sorted(aiht, reverse=True)
    assert boundary_table(C_values=(2.0,))[0]["acosamp"] is None


# ── AIHT / AHTP report ──────────────────────────────────
def test_aiht_report_feasible_at_exact_projection():
    report = aiht_report(1.0, 5.0, 0.1, 100.0)
    assert report.feasible
    assert report.inputs["mu"] == pytest.approx(1 / 1.1)
    assert report.constants["c4"] < 1
    assert report.error_coefficient == pytest.approx(101 / math.sqrt(0.9))


def test_aiht_report_rejects_step_outside_interval():
    report = aiht_report(1.0, 5.0, 0.1, 100.0, mu=2.0)
    assert not report.conditions["mu_admissible"]
    assert not report.feasible


def test_aiht_report_input_checks():
    with pytest.raises(InvalidArgumentError):
        aiht_report(1.0, 5.0, 1.0, 100.0)
    with pytest.raises(InvalidArgumentError):
        aiht_report(1.0, 5.0, 0.1, 0.0)


def test_aiht_report_noise_iterations():
    report = aiht_report(1.0, 5.0, 0.1, 100.0, y_norm=1.0, e_norm=1e-4)
    c4 = report.constants["c4"]
    expected = math.ceil(math.log(100.0 * 1e-8) / math.log(c4))
    assert report.constants["t_star"] == expected


# ── ACoSaMP / ASP reports ───────────────────────────────
def test_cosamp_family_feasible_for_tiny_deltas():
    args = (1.0, 1.0, 5.0, 1e-3, 1e-6, 1e-6, 1e-6)
    acosamp = acosamp_report(*args)
    asp = asp_report(*args)
    assert acosamp.feasible and asp.feasible
    assert acosamp.constants["rho1rho2"] < 1
    assert asp.constants["contraction"] < 1
    assert asp.constants["ls_factor"] == pytest.approx((1 + 1e-6) / (1 - 1e-6))


def test_cosamp_constants_grow_with_rip_constants():
    base = acosamp_report(1.0, 1.0, 5.0, 0.1, 0.01, 0.02, 0.03)
    worse = acosamp_report(1.0, 1.0, 5.0, 0.1, 0.01, 0.02, 0.05)
    assert worse.constants["rho1"] > base.constants["rho1"]
    assert worse.constants["eta1"] > base.constants["eta1"]
    assert worse.constants["rho2"] > base.constants["rho2"]

    worse_d2 = acosamp_report(1.0, 1.0, 5.0, 0.1, 0.02, 0.02, 0.03)
    assert worse_d2.constants["rho2"] > base.constants["rho2"]
    assert worse_d2.constants["rho1rho2"] > base.constants["rho1rho2"]

    worse_d3 = acosamp_report(1.0, 1.0, 5.0, 0.1, 0.01, 0.04, 0.03)
    assert worse_d3.constants["eta1"] > base.constants["eta1"]
    assert worse_d3.constants["eta2"] > base.constants["eta2"]


def test_rho2_formula():
    report = acosamp_report(1.0, 1.0, 5.0, 0.1, 0.01, 0.02, 0.03)
    zeta = (1 / 1.1 ** 2) * (1 - math.sqrt(0.01)) ** 2
    assert report.constants["zeta"] == pytest.approx(zeta)
    assert report.constants["rho2_sq"] == pytest.approx(1 - (math.sqrt(0.03) - math.sqrt(zeta)) ** 2)


def test_broken_radicand_is_reported():
    report = asp_report(1.5, 1.5, 5.0, 1e-3, 0.2, 0.2, 0.2)
    assert not report.conditions["radicands_valid"]
    assert report.constants["eta2"] is None
    assert report.error_coefficient is None
    assert report.notes


def test_cosamp_reports_validate_inputs():
    with pytest.raises(InvalidArgumentError):
        acosamp_report(1.0, 1.0, 5.0, 0.0, 0.1, 0.1, 0.1)
    with pytest.raises(InvalidArgumentError):
        asp_report(1.0, 1.0, 5.0, 1e-3, 0.1, 1.2, 0.1)


# ── Sample bounds ───────────────────────────────────────
def test_sample_bound_cosparsity():
    eps, l, p = 0.5, 90, 100
    expected = math.ceil(32 / eps ** 2 * (10 * math.log(9 * p / (10 * eps)) + 1))
    assert sample_bound_cosparsity(eps, l, p) == expected
    assert sample_bound_cosparsity(eps, p, p) == math.ceil(32 / eps ** 2)


def test_sample_bound_corank():
    log_count = general_position_corank_log_count(144, 100)
    assert log_count <= math.log(math.comb(144, 100)) + 1e-9
    bound = sample_bound_corank(0.5, 100, 120, log_count)
    assert bound == math.ceil(128 * (log_count + 20 * math.log(18) + 1))
    assert general_position_corank_log_count(10, 10) == 0.0


def test_sample_bounds_follow_their_formulas():
    rng = np.random.default_rng(5)
    for _ in range(100):
        eps = float(rng.uniform(0.05, 0.95))
        p = int(rng.integers(1, 300))
        l = int(rng.integers(0, p + 1))
        k = p - l
        log_term = k * math.log(9 * p / (k * eps)) if k else 0.0
        assert sample_bound_cosparsity(eps, l, p) == math.ceil(32 / eps ** 2 * (log_term + 1))

        d = int(rng.integers(1, 200))
        r = int(rng.integers(0, d + 1))
        log_sub = float(rng.uniform(0.0, 500.0))
        expected = math.ceil(32 / eps ** 2 * (log_sub + (d - r) * math.log(9 / eps) + 1))
        assert sample_bound_corank(eps, r, d, log_sub) == expected


def test_sample_bound_input_checks():
    with pytest.raises(InvalidArgumentError):
        sample_bound_cosparsity(0.0, 5, 10)
    with pytest.raises(InvalidArgumentError):
        sample_bound_corank(0.1, 130, 120, 1.0)


# ── Omega-RIP ───────────────────────────────────────────
def test_rip_decreases_with_cosparsity(small_gaussian, small_frame):
    d7 = omega_rip_exhaustive(small_gaussian, small_frame, 7).delta
    d8 = omega_rip_exhaustive(small_gaussian, small_frame, 8).delta
    d5 = omega_rip_exhaustive(small_gaussian, small_frame, 5).delta
    assert d8 <= d7 + 1e-12
    assert d7 <= d5 + 1e-12


def test_restricted_deviation_is_projected_norm(small_gaussian, small_frame, rng):
    for _ in range(5):
        cosupport = Cosupport(rng.choice(10, size=6, replace=False), 10)
        assert rip_deviation(small_gaussian, small_frame, cosupport) == pytest.approx(
            projected_operator_norm(small_gaussian, small_frame, cosupport), abs=1e-10
        )


def test_projected_norm_bounded_by_union_deviation(small_gaussian, small_frame, rng):
    # both null spaces sit inside the null space of a ∩ b
    for _ in range(5):
        a = Cosupport(rng.choice(10, size=7, replace=False), 10)
        b = Cosupport(rng.choice(10, size=7, replace=False), 10)
        cross = projected_operator_norm(small_gaussian, small_frame, a, b)
        assert cross <= rip_deviation(small_gaussian, small_frame, a.intersect(b)) + 1e-10


@pytest.mark.parametrize("l", [5, 6, 7])
def test_restricted_operator_norm_within_rip_constant(small_gaussian, small_frame, l):
    delta = omega_rip_exhaustive(small_gaussian, small_frame, l).delta
    for rows in itertools.combinations(range(10), l):
        basis = CosupportProjector(small_frame, Cosupport(rows, 10)).basis()
        assert np.linalg.norm(small_gaussian @ basis, 2) ** 2 <= 1 + delta + 1e-9


def test_corank_constant_matches_cosparsity_constant_in_general_position(small_gaussian, small_frame):
    by_corank = omega_rip_corank_exhaustive(small_gaussian, small_frame, 5)
    by_size = omega_rip_exhaustive(small_gaussian, small_frame, 5)
    assert by_corank.corank
    assert by_corank.delta == pytest.approx(by_size.delta, abs=1e-12)


def test_orthonormal_measurements_have_zero_constant(small_frame):
    assert omega_rip_exhaustive(np.eye(8), small_frame, 6).delta == pytest.approx(0.0, abs=1e-12)


def test_sampled_is_lower_bound(small_gaussian, small_frame):
    exact = omega_rip_exhaustive(small_gaussian, small_frame, 6).delta
    sampled = omega_rip_sampled(small_gaussian, small_frame, 6, trials=30, seed=0)
    assert sampled.is_lower_bound
    assert sampled.delta <= exact + 1e-12
    assert omega_rip_sampled(small_gaussian, small_frame, 6, trials=0, seed=0).delta == 0.0


def test_sampled_cosupports_are_nested(small_gaussian, small_frame):
    small = omega_rip_sampled(small_gaussian, small_frame, 4, trials=20, seed=3).delta
    large = omega_rip_sampled(small_gaussian, small_frame, 7, trials=20, seed=3).delta
    assert large <= small + 1e-12


def test_exhaustive_budget(small_gaussian, small_frame):
    with pytest.raises(EnumerationBudgetError):
        omega_rip_exhaustive(small_gaussian, small_frame, 5, budget=10)


def test_sigma_sq_estimate(small_gaussian):
    assert estimate_sigma_sq(small_gaussian) == pytest.approx(np.linalg.norm(small_gaussian, 2) ** 2, rel=1e-8)


# ── Non-exact signals ───────────────────────────────────
def test_best_approximation_of_exact_signal_is_itself(step):
    Omega = make_1d_dif(201)
    assert_allclose(best_cosparse_approximation(step, Omega, 198), step, atol=1e-12)


def test_nonexact_bound_reduces_to_noise_term(step, rng):
    Omega = make_1d_dif(201)
    M = rng.standard_normal((80, 201)) / np.sqrt(80)
    report = aiht_report(1.0, 5.0, 0.1, 100.0)
    bound = nonexact_bound(report, step, Omega, M, 198, e_norm=0.01)
    assert bound == pytest.approx(report.error_coefficient * 0.01, abs=1e-9)


def test_nonexact_bound_covers_recovery_error():
    Omega = make_1d_dif(60)
    clean = gen_cosparse_problem(Omega, 55, 50, seed=11)
    x = clean.x + 1e-3 * np.random.default_rng(0).standard_normal(60)
    problem = MeasurementProblem(M=clean.M, y=clean.M @ x, x=x)
    result = asp(problem, Omega, 55, SolverConfig(variant=Variant.ASP, max_iters=100))

    report = asp_report(1.0, 1.0, 5.0, 1e-3, 1e-6, 1e-6, 1e-6)
    bound = nonexact_bound(report, x, Omega, clean.M, 55)
    assert np.linalg.norm(x - result.x_hat) <= bound
