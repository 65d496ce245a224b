# tests/test_solvers.py
import math

import numpy as np
import pytest
from scipy.sparse.linalg import aslinearoperator

from errors import DivergenceError, InsufficientMeasurementsError, InvalidArgumentError
from experiments import gen_cosparse_problem
from models import MeasurementProblem, SolverConfig, StepRule, StopRule, Variant
from operators import Cosupport, cosparsity, make_1d_dif, make_random_tight_frame
from projection import CosupportProjector, get_scheme
from solvers import (
    StepState, adaptive_step, aiht, ahtp, asp, dif_kappa_bound, expansion_size, optimal_step,
    resolve_step, solve, targeted_cosparsity,
)


def _cfg(variant, **kwargs):
    kwargs.setdefault("cg_tol", 1e-12)
    return SolverConfig(variant=variant, **kwargs)


# ── Targeted cosparsity ─────────────────────────────────
def test_targeted_cosparsity_general_position():
    assert targeted_cosparsity("general-position", 120, 108, 100) == 66
    assert targeted_cosparsity("general-position", 120, 20, 50) == 50


def test_targeted_cosparsity_dif():
    l = targeted_cosparsity("dif", 256, 128, 10 ** 6)
    assert l == 356
    assert dif_kappa_bound(256, l) <= 64
    assert dif_kappa_bound(256, l - 1) > 64


def test_targeted_cosparsity_errors():
    with pytest.raises(InvalidArgumentError):
        targeted_cosparsity("general-position", 10, 11, 5)
    with pytest.raises(InsufficientMeasurementsError):
        targeted_cosparsity("dif", 10, 30, 5)
    with pytest.raises(InvalidArgumentError):
        targeted_cosparsity("banded", 10, 5, 5)


def test_expansion_size():
    assert expansion_size(_cfg(Variant.ACOSAMP, a_fraction=None), 100, 144) == 56
    assert expansion_size(_cfg(Variant.ASP), 100, 144) == 100
    assert expansion_size(_cfg(Variant.ASP, a_fraction=0.5), 9, 144) == 4
    assert expansion_size(_cfg(Variant.ACOSAMP, a_fraction=None), 10, 144) == 1


# ── Recovery ────────────────────────────────────────────
@pytest.mark.parametrize("variant", [Variant.ASP, Variant.ACOSAMP, Variant.RASP])
def test_noiseless_piecewise_constant_recovery(variant):
    Omega = make_1d_dif(60)
    problem = gen_cosparse_problem(Omega, 55, 50, seed=11)
    result = solve(problem, Omega, 55, _cfg(variant, max_iters=100))
    assert result.relative_error(problem.x) < 1e-5


def test_ahtp_adaptive_recovery():
    Omega = make_1d_dif(60)
    problem = gen_cosparse_problem(Omega, 55, 50, seed=11)
    result = ahtp(problem, Omega, 55, _cfg(Variant.AHTP, step_rule=StepRule.ADAPTIVE, max_iters=200))
    assert result.relative_error(problem.x) < 1e-5


def test_asp_with_identity_measurements_stops_within_two_iterations():
    Omega = make_1d_dif(30)
    x = gen_cosparse_problem(Omega, 26, 30, seed=2).x
    problem = MeasurementProblem(M=np.eye(30), y=x, x=x)
    result = asp(problem, Omega, 26, _cfg(Variant.ASP))
    assert result.converged
    assert result.iterations <= 2
    assert result.relative_error(x) < 1e-12


def test_result_bookkeeping():
    Omega = make_1d_dif(30)
    problem = gen_cosparse_problem(Omega, 26, 20, seed=1)
    cfg = _cfg(Variant.AIHT, mu=0.2, max_iters=7, stop=StopRule.MAX_ONLY, record_iterates=True)
    result = aiht(problem, Omega, 26, cfg)
    assert result.iterations == 7
    assert len(result.residual_history) == 8
    assert len(result.iterates) == 8
    assert result.converged
    assert result.residual_history[0] == pytest.approx(np.linalg.norm(problem.y))
    assert result.target_cosparsity == 26


@pytest.mark.parametrize("variant", [Variant.AIHT, Variant.AHTP, Variant.ACOSAMP, Variant.ASP])
def test_output_is_cosparse(variant):
    Omega = make_random_tight_frame(30, 24, seed=5)
    for seed in range(50):
        problem = gen_cosparse_problem(Omega, 18, 16, seed=seed)
        cfg = _cfg(variant, step_rule=StepRule.ADAPTIVE, max_iters=5, stop=StopRule.MAX_ONLY)
        result = solve(problem, Omega, 18, cfg)
        coeffs = np.abs(Omega.apply(result.x_hat))
        tol = 1e-8 * max(float(coeffs.max()), 1e-300)
        assert cosparsity(Omega, result.x_hat, zero_tol=tol) >= 18


def test_ahtp_first_step_beats_aiht():
    Omega = make_random_tight_frame(30, 24, seed=2)
    for seed in range(50):
        problem = gen_cosparse_problem(Omega, 18, 16, seed=seed)
        cfg = dict(mu=0.3, max_iters=1, stop=StopRule.MAX_ONLY)
        r_iht = aiht(problem, Omega, 18, _cfg(Variant.AIHT, **cfg))
        r_htp = ahtp(problem, Omega, 18, _cfg(Variant.AHTP, **cfg))
        assert r_htp.residual_history[1] <= r_iht.residual_history[1] + 1e-9


def test_input_checks():
    Omega = make_1d_dif(10)
    problem = gen_cosparse_problem(Omega, 7, 8, seed=0)
    with pytest.raises(InvalidArgumentError):
        solve(problem, Omega, 10, _cfg(Variant.AIHT))
    with pytest.raises(InvalidArgumentError):
        solve(problem, make_1d_dif(11), 5, _cfg(Variant.AIHT))


def test_divergence_is_reported():
    Omega = make_1d_dif(40)
    problem = gen_cosparse_problem(Omega, 35, 20, seed=3)
    with pytest.raises(DivergenceError):
        aiht(problem, Omega, 35, _cfg(Variant.AIHT, mu=50.0, max_iters=200))


def test_linear_operator_measurements():
    Omega = make_1d_dif(40)
    problem = gen_cosparse_problem(Omega, 36, 35, seed=4)
    wrapped = MeasurementProblem(M=aslinearoperator(problem.M), y=problem.y, x=problem.x)
    a = solve(problem, Omega, 36, _cfg(Variant.ASP, max_iters=3, stop=StopRule.MAX_ONLY))
    b = solve(wrapped, Omega, 36, _cfg(Variant.ASP, max_iters=3, stop=StopRule.MAX_ONLY))
    np.testing.assert_allclose(a.x_hat, b.x_hat, atol=1e-8)


# ── Step sizes ──────────────────────────────────────────
def _state(seed, l=18):
    Omega = make_random_tight_frame(30, 24, seed=seed)
    problem = gen_cosparse_problem(Omega, l, 16, seed=seed)
    A = aslinearoperator(problem.M)
    y = problem.y
    scheme = get_scheme("thresholding", Omega)
    update = lambda x_g, cosupport, x0=None: CosupportProjector(Omega, cosupport).apply(x_g)
    x = np.zeros(Omega.d)
    g = A.rmatvec(y - A.matvec(x))
    return StepState(A, y, Omega, l, x, g, Cosupport.full(Omega.p), scheme, update)


def test_adaptive_step_minimises_its_quadratic(rng):
    for seed in range(50):
        state = _state(seed)
        mu, note = adaptive_step(state)
        assert note is None and mu > 0
        target = state.scheme.select(state.Omega, state.gradient, state.l)
        qg = CosupportProjector(state.Omega, target).apply(state.gradient)

        def objective(step):
            r = state.y - state.A.matvec(state.x_prev + step * qg)
            return float(r @ r)

        best = objective(mu)
        for eps in rng.uniform(-0.5, 0.5, size=100):
            assert best <= objective(mu * (1 + eps)) + 1e-12


def test_optimal_step_never_loses_to_constant():
    cfg = _cfg(Variant.AIHT, step_rule=StepRule.OPTIMAL, mu=0.7)
    for seed in range(5):
        state = _state(seed)
        mu, _ = optimal_step(state, cfg)
        assert 0 < mu <= cfg.mu_max
        assert state.objective(mu) <= state.objective(cfg.mu) + 1e-12


def test_zero_gradient_gives_zero_adaptive_step():
    state = _state(0)
    state.gradient = np.zeros_like(state.gradient)
    mu, note = adaptive_step(state)
    assert mu == 0.0 and note


def test_all_step_rules_run():
    Omega = make_1d_dif(40)
    problem = gen_cosparse_problem(Omega, 36, 30, seed=8)
    for rule in StepRule:
        result = aiht(problem, Omega, 36, _cfg(Variant.AIHT, step_rule=rule, mu=0.2, max_iters=5))
        assert math.isfinite(result.residual_history[-1])


def test_default_step_is_inverse_squared_norm(rng):
    M = rng.standard_normal((12, 20)) / np.sqrt(12)
    resolved = resolve_step(SolverConfig(), M)
    assert resolved.mu == pytest.approx(1 / np.linalg.norm(M, 2) ** 2, rel=1e-12)
    assert resolve_step(SolverConfig(mu=0.4), M).mu == 0.4
    via_operator = resolve_step(SolverConfig(), aslinearoperator(M))
    assert via_operator.mu == pytest.approx(resolved.mu, rel=1e-6)


def test_default_step_does_not_diverge_at_full_sampling():
    Omega = make_random_tight_frame(30, 24, seed=3)
    problem = gen_cosparse_problem(Omega, 22, 24, seed=0)
    result = aiht(problem, Omega, 22, _cfg(Variant.AIHT, max_iters=50, stop=StopRule.MAX_ONLY))
    assert result.residual_history[-1] <= result.residual_history[0]
