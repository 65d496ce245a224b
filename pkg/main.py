# main.py
"""Command-line entry point.

    python main.py recover --operator dif1d:60 --m 40 --l 55 --variant ASP
    python main.py project --signal step --scheme thresholding
    python main.py phase-diagram --frame-rows 144 --d 120 --grid-size 10 --trials 10
    python main.py theory --sweep
    python main.py rip --operator tight:10x8 --m 6 --l 7
    python main.py phantom --size 64 --lines 15

Exit codes: 0 success, 1 usage or I/O error, 2 solver did not converge.
"""
import argparse
import logging
import os
import sys

from pydantic import ValidationError

import config
from cosparse_service import CosparseService
from errors import CosparseError
from fileio import (
    read_kv, write_heatmap, write_json, write_kv, write_matrix, write_pgm,
    write_phase_grid, write_table, write_vector,
)
from models import RunConfig

logger = logging.getLogger(__name__)

EXIT_OK            = 0
EXIT_ERROR         = 1
EXIT_NOT_CONVERGED = 2

COMMAND_DEFAULTS = {
    "phantom": {"variant": "RASP"},
}


def _optional_float(text):
    return None if text.lower() == "none" else float(text)


def _flag(parser, name, **kwargs):
    parser.add_argument(name, default=argparse.SUPPRESS, **kwargs)


# ── Argument parser ─────────────────────────────────────
def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    _flag(common, "--config", dest="config_path", metavar="PATH", help="flat key=value file of RunConfig fields")
    _flag(common, "--seed", type=int)
    _flag(common, "--workers", type=int)
    _flag(common, "--out", metavar="DIR")
    _flag(common, "--log-level", dest="log_level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    _flag(common, "--operator", help="dif1d:N, fused:N, dif2d:HxW, tight:PxD, identity:N or dense:PATH")

    solver = argparse.ArgumentParser(add_help=False)
    _flag(solver, "--variant", help="AIHT, AHTP, ACoSaMP, ASP, RAHTP, RACoSaMP or RASP")
    _flag(solver, "--step-rule", choices=["constant", "optimal", "adaptive"])
    _flag(solver, "--mu", type=_optional_float, help="constant step, or 'none' for 1/||M||^2")
    _flag(solver, "--a-fraction", type=_optional_float, help="expansion factor a, or 'none' for (2l-p)/l")
    _flag(solver, "--lam", type=float)
    _flag(solver, "--max-iters", type=int)
    _flag(solver, "--scheme", choices=["auto", "thresholding", "exhaustive", "dif1d-dp", "fused-lasso-dp"])

    parser = argparse.ArgumentParser(description="Cosparse analysis greedy pursuits")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("recover", parents=[common, solver], help="recover a signal from measurements")
    _flag(p, "--signal", metavar="PATH", help="ground truth, used for the error report")
    _flag(p, "--matrix", metavar="PATH")
    _flag(p, "--measurements", metavar="PATH")
    _flag(p, "--m", type=int, help="measurements of a generated problem")
    _flag(p, "--l", type=int, help="cosparsity passed to the solver")
    _flag(p, "--noise-sigma", type=float)
    _flag(p, "--snr-db", type=float)

    p = sub.add_parser("project", parents=[common, solver], help="project a vector onto a cosparse subspace")
    _flag(p, "--signal", help="vector file, or 'step' for the built-in step signal")
    _flag(p, "--l", type=int)

    p = sub.add_parser("phase-diagram", parents=[common, solver], help="recovery-rate sweep over (delta, rho)")
    _flag(p, "--grid-size", type=int)
    _flag(p, "--trials", type=int)
    _flag(p, "--frame-rows", type=int)
    _flag(p, "--d", type=int)

    p = sub.add_parser("theory", parents=[common], help="recovery-guarantee constants")
    _flag(p, "--theory", choices=["aiht", "ahtp", "acosamp", "asp"])
    _flag(p, "--matrix", metavar="PATH", help="estimate sigma_M^2 from this matrix")
    _flag(p, "--C-l", type=float)
    _flag(p, "--C-2lp", type=float)
    _flag(p, "--sigma-sq", type=float)
    _flag(p, "--delta-2lp", type=float)
    _flag(p, "--delta-3l2p", type=float)
    _flag(p, "--delta-4l3p", type=float)
    _flag(p, "--eta", type=float)
    _flag(p, "--gamma", type=float)
    _flag(p, "--mu-theory", type=float)
    _flag(p, "--sweep", action="store_true", help="feasibility boundaries for C in {1, 1.05, 1.1}")

    p = sub.add_parser("rip", parents=[common], help="estimate the Omega-RIP constant")
    _flag(p, "--matrix", metavar="PATH")
    _flag(p, "--m", type=int)
    _flag(p, "--l", type=int)
    _flag(p, "--rip-mode", choices=["exhaustive", "corank", "sampled"])
    _flag(p, "--trials", type=int)
    _flag(p, "--frame-rows", type=int)
    _flag(p, "--d", type=int)

    p = sub.add_parser("phantom", parents=[common, solver], help="Shepp-Logan recovery from radial Fourier lines")
    _flag(p, "--size", type=int)
    _flag(p, "--lines", type=int)
    _flag(p, "--snr-db", type=float)
    return parser


def resolve_config(args):
    """Environment defaults < command defaults < config file < flags."""
    flags = vars(args).copy()
    command = flags.pop("command")
    config_path = flags.pop("config_path", None)
    flags.pop("log_level", None)

    values = {"command": command}
    values.update(COMMAND_DEFAULTS.get(command, {}))
    if config_path:
        from_file = read_kv(config_path)
        from_file.pop("command", None)
        values.update(from_file)
    values.update(flags)
    return RunConfig(**values)


# ── Commands ────────────────────────────────────────────
def _print_record(record):
    for key, value in record.items():
        print(f"{key}={'none' if value is None else value}")


def cmd_recover(service, out):
    result, problem = service.recover()
    write_vector(os.path.join(out, "x_hat.csv"), result.x_hat)
    record = result.to_record(problem.x)
    record["residual_history"] = result.residual_history
    write_json(os.path.join(out, "result.json"), record)
    record.pop("residual_history")
    _print_record(record)
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_project(service, out):
    _, projected, record = service.project()
    write_vector(os.path.join(out, "projected.csv"), projected)
    write_kv(os.path.join(out, "projection.txt"), record)
    _print_record(record)
    return EXIT_OK


def cmd_phase_diagram(service, out):
    grid = service.phase_diagram()
    name = f"phase_{service.run.variant.lower()}"
    write_phase_grid(os.path.join(out, f"{name}.csv"), grid)
    write_heatmap(os.path.join(out, f"{name}.pgm"), grid)
    print(grid.as_array())
    if grid.completed is not None:
        logger.error("Sweep did not finish; the CSV holds the completed cells only")
        return EXIT_ERROR
    return EXIT_OK


def cmd_theory(service, out):
    records = service.theory()
    if service.run.sweep:
        write_table(os.path.join(out, "theory_sweep.csv"), records)
        for row in records:
            print(" ".join(f"{k}={'none' if v is None else v}" for k, v in row.items()))
    else:
        write_kv(os.path.join(out, "theory.txt"), records[0])
        _print_record(records[0])
    return EXIT_OK


def cmd_rip(service, out):
    record = service.rip()
    write_kv(os.path.join(out, "rip.txt"), record)
    _print_record(record)
    return EXIT_OK


def cmd_phantom(service, out):
    report, images = service.phantom()
    for name, image in images.items():
        write_pgm(os.path.join(out, f"phantom_{name}.pgm"), image)
        write_matrix(os.path.join(out, f"phantom_{name}.csv"), image)
    record = report.to_record()
    write_json(os.path.join(out, "phantom.json"), record)
    _print_record(record)
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


COMMANDS = {
    "recover":       cmd_recover,
    "project":       cmd_project,
    "phase-diagram": cmd_phase_diagram,
    "theory":        cmd_theory,
    "rip":           cmd_rip,
    "phantom":       cmd_phantom,
}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; 2 is reserved for non-convergence
        return EXIT_OK if exc.code in (0, None) else EXIT_ERROR
    logging.basicConfig(
        level  = getattr(args, "log_level", config.LOG_LEVEL),
        format = "%(asctime)s [%(levelname)s] %(message)s",
        stream = sys.stderr,
    )
    try:
        run = resolve_config(args)
        os.makedirs(run.out, exist_ok=True)
        with open(os.path.join(run.out, "config.txt"), "w") as f:
            f.write(run.to_kv() + "\n")
        logger.info(f"Running {run.command}, output in {run.out}")
        return COMMANDS[run.command](CosparseService(run), run.out)
    except (CosparseError, ValidationError, OSError, ValueError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
