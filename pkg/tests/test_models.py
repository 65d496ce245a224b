# tests/test_models.py
import numpy as np
import pytest
from pydantic import ValidationError

from models import (
    GuaranteeReport, MeasurementProblem, PhaseGrid, RipEstimate, RunConfig, SolverConfig,
    SolverResult, Variant,
)
from operators import Cosupport


def test_variant_parse_is_case_insensitive():
    assert Variant.parse("acosamp") == Variant.ACOSAMP
    assert Variant.parse("RASP").relaxed
    assert not Variant.AHTP.relaxed
    with pytest.raises(ValueError):
        Variant.parse("OMP")


@pytest.mark.parametrize("fields", [
    {"mu": 0.0},
    {"lam": -1.0},
    {"a_fraction": 1.5},
    {"max_iters": 0},
])
def test_solver_config_validation(fields):
    with pytest.raises(ValidationError):
        SolverConfig(**fields)


def test_solver_config_leaves_step_unset_by_default():
    assert SolverConfig().mu is None
    assert SolverConfig(mu=0.5).mu == 0.5


def test_solver_config_is_frozen():
    cfg = SolverConfig()
    with pytest.raises(ValidationError):
        cfg.mu = 2.0


def test_measurement_problem_shapes():
    with pytest.raises(ValidationError):
        MeasurementProblem(M=np.zeros((3, 4)), y=np.zeros(4))
    problem = MeasurementProblem(M=np.zeros((3, 4)), y=np.zeros(3))
    assert (problem.m, problem.d) == (3, 4)


def test_solver_result_history_length():
    with pytest.raises(ValidationError):
        SolverResult(
            variant="AIHT", x_hat=np.zeros(2), cosupport=Cosupport([], 1), target_cosparsity=0,
            iterations=2, residual_history=[1.0], converged=False,
        )


def test_solver_result_record():
    result = SolverResult(
        variant="ASP", x_hat=np.array([3.0, 4.0]), cosupport=Cosupport([0], 1),
        target_cosparsity=1, iterations=1, residual_history=[1.0, 0.0], converged=True,
    )
    record = result.to_record(np.array([3.0, 0.0]))
    assert record["recovery_error"] == pytest.approx(4 / 3)
    assert record["cosupport_size"] == 1


def test_sampled_rip_must_be_lower_bound():
    with pytest.raises(ValidationError):
        RipEstimate(l=3, delta=0.1, mode="sampled")


def test_guarantee_report_record():
    report = GuaranteeReport(
        algorithm="ASP", inputs={"C_l": 1.0}, constants={"eta2": None},
        conditions={"a": True, "b": False}, notes=["x"],
    )
    record = report.to_record()
    assert record["feasible"] is False
    assert record["constants.eta2"] is None
    assert record["note.0"] == "x"


def test_phase_grid_checks_shape():
    with pytest.raises(ValidationError):
        PhaseGrid(delta_values=[0.5], rho_values=[0.5, 1.0], trials=1, seed=0, recovery_rate=[[0.5]])
    with pytest.raises(ValidationError):
        PhaseGrid(delta_values=[0.5], rho_values=[0.5], trials=1, seed=0, recovery_rate=[[1.5]])


def test_run_config_forbids_unknown_keys():
    with pytest.raises(ValidationError):
        RunConfig(command="theory", colour="blue")


def test_run_config_kv_text():
    text = RunConfig(command="theory", sweep=True).to_kv()
    assert "sweep=true" in text.splitlines()
    assert "operator=none" in text.splitlines()
