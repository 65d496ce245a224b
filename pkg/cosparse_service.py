# cosparse_service.py
import logging

import numpy as np

from config import SIGMA_SQ
from errors import InvalidArgumentError
from experiments import (
    default_grid, gen_cosparse_problem, phantom_experiment, phase_diagram, step_signal,
)
from fileio import read_matrix, read_operator_matrix, read_vector
from models import MeasurementProblem, SolverConfig, Variant
from operators import (
    make_1d_dif, make_2d_dif, make_dense, make_fused_lasso, make_identity,
    make_random_tight_frame,
)
from projection import get_scheme, project
from solvers import solve
from theory import (
    acosamp_report, aiht_report, asp_report, boundary_table, estimate_sigma_sq,
    omega_rip_corank_exhaustive, omega_rip_exhaustive, omega_rip_sampled,
)

logger = logging.getLogger(__name__)


OPERATOR_BUILDERS = {
    "dif1d":    (1, make_1d_dif),
    "fused":    (1, make_fused_lasso),
    "dif2d":    (2, make_2d_dif),
    "identity": (1, make_identity),
    "tight":    (2, make_random_tight_frame),
}


def build_operator(spec, seed=0):
    """Operator from 'kind:dims', e.g. dif1d:201, fused:50, dif2d:64x64, tight:144x120, identity:40, dense:PATH."""
    kind, sep, arg = (spec or "").partition(":")
    kind = kind.strip().lower()
    if not sep or not arg:
        raise InvalidArgumentError(f"operator spec must look like kind:dims, got {spec!r}")
    if kind == "dense":
        return make_dense(read_operator_matrix(arg))
    if kind not in OPERATOR_BUILDERS:
        raise InvalidArgumentError(f"Unsupported operator kind: {kind}")

    count, builder = OPERATOR_BUILDERS[kind]
    try:
        dims = [int(v) for v in arg.lower().split("x")]
    except ValueError:
        dims = []
    if len(dims) != count:
        raise InvalidArgumentError(f"bad dimensions in operator spec {spec!r}")
    if kind == "tight":
        return builder(*dims, seed)
    return builder(*dims)


class CosparseService:
    """Runs one command's worth of work from a RunConfig."""

    def __init__(self, run):
        self.run = run

    # ── helpers ─────────────────────────────────────────
    def operator(self, default):
        spec = self.run.operator or default
        Omega = build_operator(spec, self.run.seed)
        logger.info(f"Operator {spec}: p={Omega.p}, d={Omega.d}")
        return Omega

    def solver_config(self, **overrides):
        run = self.run
        fields = dict(
            variant    = Variant.parse(run.variant),
            step_rule  = run.step_rule,
            mu         = run.mu,
            a_fraction = run.a_fraction,
            lam        = run.lam,
            max_iters  = run.max_iters,
            scheme     = run.scheme,
        )
        fields.update(overrides)
        return SolverConfig(**fields)

    def _problem(self, Omega):
        run = self.run
        if run.measurements or run.matrix:
            if not (run.measurements and run.matrix):
                raise InvalidArgumentError("--measurements and --matrix must be given together")
            M = read_matrix(run.matrix)
            y = read_vector(run.measurements)
            x = read_vector(run.signal) if run.signal else None
            return MeasurementProblem(M=M, y=y, x=x)
        if run.m is None or run.l is None:
            raise InvalidArgumentError(
                "recover needs --measurements and --matrix, or --m and --l to generate a problem"
            )
        logger.info(f"Generating problem: m={run.m}, l={run.l}, noise_sigma={run.noise_sigma}, seed={run.seed}")
        return gen_cosparse_problem(
            Omega, run.l, run.m, noise_sigma=run.noise_sigma, seed=run.seed, snr_db=run.snr_db,
        )

    # ── commands ────────────────────────────────────────
    def recover(self):
        """Returns (SolverResult, MeasurementProblem)."""
        Omega = self.operator("dif1d:201")
        problem = self._problem(Omega)
        if self.run.l is None:
            raise InvalidArgumentError("recover needs --l, the cosparsity passed to the solver")
        cfg = self.solver_config()
        result = solve(problem, Omega, self.run.l, cfg)
        logger.info(
            f"{result.variant}: {result.iterations} iterations, converged={result.converged}, "
            f"residual={result.residual_history[-1]:.3e}"
        )
        return result, problem

    def project(self):
        """Returns (z, Q z, record)."""
        run = self.run
        if run.signal is None or run.signal == "step":
            Omega = self.operator("dif1d:201")
            z = step_signal(Omega.d)
        else:
            z = read_vector(run.signal)
            Omega = self.operator(f"dif1d:{z.size}")
        if z.size != Omega.d:
            raise InvalidArgumentError(f"signal has {z.size} entries but the operator acts on R^{Omega.d}")
        l = Omega.p - 1 if run.l is None else run.l
        scheme = get_scheme(run.scheme, Omega)
        cosupport = scheme.select(Omega, z, l)
        projected = project(Omega, cosupport, z)
        record = {
            "scheme":           scheme.kind.value,
            "l":                l,
            "cosupport_size":   len(cosupport),
            "projection_error": float(np.linalg.norm(z - projected)),
        }
        return z, projected, record

    def phase_diagram(self, progress=True):
        run = self.run
        Omega = self.operator(f"tight:{run.frame_rows}x{run.d}")
        grid_values = default_grid(run.grid_size)
        return phase_diagram(
            Omega, self.solver_config(), grid_values, grid_values, run.trials,
            seed=run.seed, workers=run.workers, progress=progress,
        )

    def _sigma_sq(self):
        run = self.run
        if run.sigma_sq is not None:
            return run.sigma_sq
        if run.matrix:
            return estimate_sigma_sq(read_matrix(run.matrix))
        return SIGMA_SQ

    def theory(self):
        """Returns a list of flat records: one report, or the boundary table."""
        run = self.run
        sigma_sq = self._sigma_sq()
        if run.sweep:
            return boundary_table(sigma_sq=sigma_sq, gamma=run.gamma)

        name = run.theory.lower()
        if name in ("aiht", "ahtp"):
            report = aiht_report(run.C_l, sigma_sq, run.delta_2lp, run.eta, mu=run.mu_theory)
        elif name in ("acosamp", "asp"):
            delta_3 = run.delta_2lp if run.delta_3l2p is None else run.delta_3l2p
            delta_4 = delta_3 if run.delta_4l3p is None else run.delta_4l3p
            C_2lp = run.C_l if run.C_2lp is None else run.C_2lp
            build = acosamp_report if name == "acosamp" else asp_report
            report = build(run.C_l, C_2lp, sigma_sq, run.gamma, run.delta_2lp, delta_3, delta_4)
        else:
            raise InvalidArgumentError(f"Unsupported theory report: {run.theory}")
        if not report.feasible:
            logger.warning(f"{report.algorithm}: guarantee conditions not met for these inputs")
        return [report.to_record()]

    def rip(self):
        run = self.run
        Omega = self.operator(f"tight:{run.frame_rows}x{run.d}")
        if run.matrix:
            M = read_matrix(run.matrix)
        else:
            m = run.m or Omega.d // 2
            M = np.random.default_rng(run.seed).standard_normal((m, Omega.d)) / np.sqrt(m)
        if run.l is None:
            raise InvalidArgumentError("rip needs --l (cosparsity, or corank in corank mode)")
        mode = run.rip_mode.lower()
        if mode == "exhaustive":
            estimate = omega_rip_exhaustive(M, Omega, run.l, workers=run.workers)
        elif mode == "corank":
            estimate = omega_rip_corank_exhaustive(M, Omega, run.l, workers=run.workers)
        elif mode == "sampled":
            estimate = omega_rip_sampled(M, Omega, run.l, run.trials, run.seed)
        else:
            raise InvalidArgumentError(f"Unsupported RIP mode: {run.rip_mode}")
        record = estimate.to_record()
        record["sigma_sq"] = estimate_sigma_sq(M)
        return record

    def phantom(self):
        run = self.run
        cfg = self.solver_config()
        return phantom_experiment(run.size, run.lines, cfg=cfg, snr_db=run.snr_db, seed=run.seed)
