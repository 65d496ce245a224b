# tests/test_cli.py
import math

import pytest

from fileio import read_kv, read_phase_grid
from main import EXIT_ERROR, EXIT_OK, build_parser, main, resolve_config


def _records(text):
    """key=value lines printed by a command."""
    out = {}
    for line in text.splitlines():
        key, sep, value = line.partition("=")
        if sep and " " not in key:
            out[key] = value
    return out


def _run(capsys, tmp_path, *argv):
    code = main([*argv, "--out", str(tmp_path)])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# ── project ─────────────────────────────────────────────
def test_project_step_with_thresholding(capsys, tmp_path):
    code, out, _ = _run(capsys, tmp_path, "project", "--signal", "step", "--scheme", "thresholding")
    assert code == EXIT_OK
    record = _records(out)
    assert float(record["projection_error"]) == pytest.approx(math.sqrt(200), abs=1e-9)
    assert (tmp_path / "projected.csv").exists()
    assert read_kv(tmp_path / "projection.txt")["scheme"] == "thresholding"


def test_project_step_with_dynamic_programming(capsys, tmp_path):
    code, out, _ = _run(capsys, tmp_path, "project", "--signal", "step", "--scheme", "dif1d-dp")
    assert code == EXIT_OK
    assert float(_records(out)["projection_error"]) == pytest.approx(2.5, abs=0.02)


def test_dp_scheme_on_dense_operator_is_rejected(capsys, tmp_path):
    code, _, err = _run(capsys, tmp_path, "project", "--operator", "tight:10x8", "--scheme", "dif1d-dp")
    assert code == EXIT_ERROR
    assert "dif1d-dp" in err


def test_missing_input_file(capsys, tmp_path):
    missing = tmp_path / "nowhere.csv"
    code, _, err = _run(capsys, tmp_path, "project", "--signal", str(missing))
    assert code == EXIT_ERROR
    assert str(missing) in err


def test_malformed_number_is_a_usage_error(capsys, tmp_path):
    code, _, _ = _run(capsys, tmp_path, "theory", "--eta", "abc")
    assert code == EXIT_ERROR


def test_bad_operator_spec(capsys, tmp_path):
    code, _, err = _run(capsys, tmp_path, "project", "--operator", "dif1d:x")
    assert code == EXIT_ERROR
    assert "operator" in err


# ── recover ─────────────────────────────────────────────
def test_recover_generated_problem(capsys, tmp_path):
    code, out, _ = _run(
        capsys, tmp_path, "recover", "--operator", "dif1d:40", "--m", "30", "--l", "36",
        "--variant", "ASP",
    )
    assert code == EXIT_OK
    record = _records(out)
    assert float(record["recovery_error"]) < 1e-6
    assert record["converged"] == "True"
    assert (tmp_path / "x_hat.csv").exists()
    assert (tmp_path / "result.json").exists()


def test_recover_needs_cosparsity(capsys, tmp_path):
    code, _, err = _run(capsys, tmp_path, "recover", "--operator", "dif1d:40", "--m", "30")
    assert code == EXIT_ERROR
    assert "--l" in err


# ── theory / rip ────────────────────────────────────────
def test_theory_sweep(capsys, tmp_path):
    code, out, _ = _run(capsys, tmp_path, "theory", "--sweep")
    assert code == EXIT_OK
    rows = [dict(token.split("=", 1) for token in line.split()) for line in out.splitlines() if line.startswith("C=")]
    assert len(rows) == 3
    assert float(rows[0]["aiht"]) == pytest.approx(1 / 3, abs=1e-6)
    assert (tmp_path / "theory_sweep.csv").exists()


def test_theory_single_report(capsys, tmp_path):
    code, out, _ = _run(capsys, tmp_path, "theory", "--theory", "aiht", "--delta-2lp", "0.1", "--eta", "100")
    assert code == EXIT_OK
    assert _records(out)["feasible"] == "True"


def test_rip_exhaustive(capsys, tmp_path):
    code, out, _ = _run(capsys, tmp_path, "rip", "--operator", "tight:10x8", "--m", "6", "--l", "7")
    assert code == EXIT_OK
    record = _records(out)
    assert record["mode"] == "exhaustive"
    assert float(record["delta"]) >= 0.0
    assert float(record["sigma_sq"]) > 0.0


# ── phase diagram ───────────────────────────────────────
def test_small_phase_diagram(capsys, tmp_path):
    code, _, _ = _run(
        capsys, tmp_path, "phase-diagram", "--frame-rows", "24", "--d", "20", "--grid-size", "2",
        "--trials", "2", "--variant", "ASP", "--max-iters", "30",
    )
    assert code == EXIT_OK
    grid = read_phase_grid(tmp_path / "phase_asp.csv")
    assert grid.delta_values == [0.5, 1.0]
    assert grid.trials == 2
    assert (tmp_path / "phase_asp.pgm").exists()


# ── configuration ───────────────────────────────────────
def test_config_echo_reproduces_the_run(capsys, tmp_path):
    code, _, _ = _run(capsys, tmp_path, "project", "--signal", "step", "--a-fraction", "none", "--mu", "0.5")
    assert code == EXIT_OK
    echoed = tmp_path / "config.txt"
    first = echoed.read_text().strip()

    args = build_parser().parse_args(["project", "--config", str(echoed)])
    assert resolve_config(args).to_kv() == first


def test_config_precedence(tmp_path):
    path = tmp_path / "run.txt"
    path.write_text("variant=RAHTP\nlines=20\n")

    args = build_parser().parse_args(["phantom"])
    assert resolve_config(args).variant == "RASP"

    args = build_parser().parse_args(["phantom", "--config", str(path)])
    run = resolve_config(args)
    assert (run.variant, run.lines) == ("RAHTP", 20)

    args = build_parser().parse_args(["phantom", "--config", str(path), "--variant", "AIHT"])
    assert resolve_config(args).variant == "AIHT"


def test_unknown_config_key_is_rejected(capsys, tmp_path):
    path = tmp_path / "run.txt"
    path.write_text("colour=blue\n")
    code, _, err = _run(capsys, tmp_path, "theory", "--config", str(path))
    assert code == EXIT_ERROR
    assert "colour" in err


@pytest.mark.slow
def test_phantom_command(capsys, tmp_path):
    code, out, _ = _run(
        capsys, tmp_path, "phantom", "--size", "32", "--lines", "12", "--snr-db", "20",
        "--max-iters", "20",
    )
    assert code in (0, 2)
    record = _records(out)
    assert float(record["psnr"]) > float(record["zero_fill_psnr"])
    for name in ("truth", "zero_fill", "recon"):
        assert (tmp_path / f"phantom_{name}.pgm").exists()
