# experiments.py
import logging
import math

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from config import WORKERS
from errors import CosparseError, InvalidArgumentError, ProblemGenerationError
from models import (
    MeasurementProblem, PhantomReport, PhaseGrid, SolverConfig, Variant,
)
from operators import Cosupport, cosparsity, make_2d_dif
from phantom import RadialFourierOperator, shepp_logan
from projection import CosupportProjector
from solvers import solve, targeted_cosparsity

logger = logging.getLogger(__name__)

RECOVERY_THRESHOLD = 1e-6
SWEEP_RESIDUAL_TOL = 1e-10
SWEEP_CHANGE_TOL   = 1e-12
PSNR_CAP           = 999.0
PHANTOM_VARIANTS   = (Variant.RASP, Variant.RACOSAMP, Variant.AIHT, Variant.RAHTP)


# ── Problem generation ──────────────────────────────────
def noise_for_snr(clean, snr_db, rng):
    """White Gaussian noise with 20*log10(||clean|| / ||e||) = snr_db."""
    e = rng.standard_normal(clean.shape)
    target = np.linalg.norm(clean) / 10 ** (snr_db / 20)
    return e * (target / np.linalg.norm(e))


def gen_cosparse_problem(Omega, l, m, noise_sigma=0.0, seed=0, snr_db=None, max_draws=100):
    """Gaussian M (entries N(0, 1/m)) and a unit-norm l-cosparse x.

    The cosupport is drawn uniformly among size-l subsets and redrawn while
    its projector kills the Gaussian seed vector. `seed` may be an int or a
    sequence such as (seed, cell, trial).
    """
    d, p = Omega.d, Omega.p
    if l < 0 or l > p:
        raise InvalidArgumentError(f"cosparsity l={l} outside [0, {p}]")
    if m < 1 or m > d:
        raise InvalidArgumentError(f"measurement count m={m} outside [1, {d}]")
    if noise_sigma < 0:
        raise InvalidArgumentError("noise_sigma must be non-negative")
    rng = np.random.default_rng(seed)

    x = None
    for _ in range(max_draws):
        cosupport = Cosupport(rng.choice(p, size=l, replace=False), p)
        candidate = CosupportProjector(Omega, cosupport).apply(rng.standard_normal(d))
        norm = np.linalg.norm(candidate)
        if norm > 1e-10:
            x = candidate / norm
            break
    if x is None:
        raise ProblemGenerationError(
            f"every drawn cosupport of size {l} forces x = 0; l is too large for this operator"
        )

    M = rng.standard_normal((m, d)) / math.sqrt(m)
    clean = M @ x
    if snr_db is not None:
        e = noise_for_snr(clean, snr_db, rng)
    elif noise_sigma > 0:
        e = noise_sigma * rng.standard_normal(m)
    else:
        e = np.zeros(m)
    return MeasurementProblem(M=M, y=clean + e, x=x, e=e)


def step_signal(d=201):
    """Two flat halves (1 and -1) followed by a single 1.5 in the last entry."""
    if d < 3:
        raise InvalidArgumentError(f"step signal needs d >= 3, got {d}")
    half = (d - 1) // 2
    z = np.full(d, -1.0)
    z[:half] = 1.0
    z[-1] = 1.5
    return z


def psnr(reference, estimate, peak=1.0):
    mse = float(np.mean((np.asarray(reference, dtype=float) - np.asarray(estimate, dtype=float)) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return float(10 * np.log10(peak ** 2 / mse))


# ── Phase transition diagrams ───────────────────────────
def default_grid(n):
    """n evenly spaced values in (0, 1]."""
    return (np.arange(1, n + 1) / n).tolist()


def solver_cosparsity(variant, Omega, m, l):
    """Cosparsity handed to a solver in the sweeps.

    Projected-gradient variants always use the targeted value. The CoSaMP/SP
    family keeps the true l for general-position operators.
    """
    kind = "dif" if Omega.is_difference else "general-position"
    if variant in (Variant.AIHT, Variant.AHTP, Variant.RAHTP) or kind == "dif":
        return targeted_cosparsity(kind, Omega.d, m, l)
    return l


def sweep_config(cfg):
    """cfg with stopping tolerances far below the recovery threshold."""
    return cfg.model_copy(update={
        "residual_tol": min(cfg.residual_tol, SWEEP_RESIDUAL_TOL),
        "change_tol":   min(cfg.change_tol, SWEEP_CHANGE_TOL),
    })


def cell_dimensions(Omega, delta, rho):
    m = max(1, int(round(delta * Omega.d)))
    m = min(m, Omega.d)
    l = int(math.floor(Omega.d - rho * m))
    return m, min(max(l, 0), Omega.p)


def _run_trial(Omega, cfg, l, m, seed, threshold):
    try:
        problem = gen_cosparse_problem(Omega, l, m, seed=seed)
        l_solver = solver_cosparsity(cfg.variant, Omega, m, l)
        result = solve(problem, Omega, l_solver, cfg)
        return result.relative_error(problem.x) < threshold
    except (CosparseError, np.linalg.LinAlgError) as exc:
        logger.debug(f"trial seed={seed} counted as failure: {exc}")
        return False


def phase_diagram(Omega, cfg, delta_values, rho_values, trials, seed=0, workers=WORKERS,
                  threshold=RECOVERY_THRESHOLD, progress=True):
    """Recovery rate per (rho, delta) cell; rows follow rho_values.

    Trial t of cell c draws from the stream (seed, c, t) whatever the worker
    count. An interrupt returns the cells finished so far.
    """
    if trials < 1:
        raise InvalidArgumentError("trials must be at least 1")
    for v in list(delta_values) + list(rho_values):
        if not 0 < v <= 1:
            raise InvalidArgumentError(f"grid values must lie in (0, 1], got {v}")

    cfg = sweep_config(cfg)
    n_rho, n_delta = len(rho_values), len(delta_values)
    rate = np.zeros((n_rho, n_delta))
    done = np.zeros((n_rho, n_delta), dtype=bool)
    logger.info(
        f"Phase diagram: {cfg.variant.value}, {n_rho}x{n_delta} cells, {trials} trials, "
        f"p={Omega.p}, d={Omega.d}, workers={workers}"
    )

    cells = [(i, j) for i in range(n_rho) for j in range(n_delta)]
    bar = tqdm(cells, desc=cfg.variant.value, disable=not progress)
    try:
        with Parallel(n_jobs=workers) as parallel:
            for i, j in bar:
                m, l = cell_dimensions(Omega, delta_values[j], rho_values[i])
                cell = i * n_delta + j
                outcomes = parallel(
                    delayed(_run_trial)(Omega, cfg, l, m, (seed, cell, t), threshold)
                    for t in range(trials)
                )
                rate[i, j] = sum(outcomes) / trials
                done[i, j] = True
                logger.debug(f"cell rho={rho_values[i]:.3f} delta={delta_values[j]:.3f} m={m} l={l}: {rate[i, j]:.2f}")
    except KeyboardInterrupt:
        logger.warning(f"Sweep interrupted after {int(done.sum())} of {len(cells)} cells")
    finally:
        bar.close()

    return PhaseGrid(
        delta_values  = [float(v) for v in delta_values],
        rho_values    = [float(v) for v in rho_values],
        trials        = trials,
        seed          = seed,
        recovery_rate = rate.tolist(),
        completed     = None if done.all() else done.tolist(),
    )


# ── Partial Fourier phantom ─────────────────────────────
def phantom_experiment(size, lines, cfg=None, snr_db=None, seed=0):
    """Recover a size x size Shepp-Logan phantom from radial Fourier lines.

    Returns (PhantomReport, images) where images holds the clipped ground
    truth, zero-fill baseline and reconstruction as 2-D arrays.
    """
    cfg = cfg or SolverConfig(variant=Variant.RASP)
    if cfg.variant not in PHANTOM_VARIANTS:
        raise InvalidArgumentError(
            f"phantom recovery supports {[v.value for v in PHANTOM_VARIANTS]}, got {cfg.variant.value}"
        )
    truth = shepp_logan(size, size)
    x = truth.ravel()
    Omega = make_2d_dif(size, size)
    A = RadialFourierOperator(size, size, lines=lines)

    clean = A.matvec(x)
    e = np.zeros_like(clean)
    if snr_db is not None:
        e = noise_for_snr(clean, snr_db, np.random.default_rng(seed))
    problem = MeasurementProblem(M=A, y=clean + e, x=x, e=e)

    # conjugate pairs carry one real degree of freedom each
    true_l = cosparsity(Omega, x)
    l = targeted_cosparsity("dif", Omega.d, A.n, true_l)
    logger.info(
        f"Phantom {size}x{size}: {lines} lines, {A.n} coefficients "
        f"({100 * A.measurement_fraction:.1f}%), cosparsity {true_l}, target {l}"
    )

    result = solve(problem, Omega, l, cfg)
    recon = np.clip(np.real(result.x_hat), 0.0, 1.0).reshape(size, size)
    zero_fill = np.clip(A.zero_fill(problem.y), 0.0, 1.0).reshape(size, size)

    def rel(img):
        return float(np.linalg.norm(img - truth) / np.linalg.norm(truth))

    report = PhantomReport(
        size                     = size,
        lines                    = lines,
        measurements             = A.n,
        measurement_fraction     = A.measurement_fraction,
        snr_db                   = snr_db,
        variant                  = cfg.variant.value,
        target_cosparsity        = l,
        true_cosparsity          = true_l,
        iterations               = result.iterations,
        converged                = result.converged,
        relative_error           = rel(recon),
        psnr                     = psnr(truth, recon),
        zero_fill_relative_error = rel(zero_fill),
        zero_fill_psnr           = psnr(truth, zero_fill),
    )
    logger.info(f"Phantom: rel. error {report.relative_error:.2e}, PSNR {report.psnr:.1f} dB "
                f"(zero-fill {report.zero_fill_psnr:.1f} dB)")
    return report, {"truth": truth, "zero_fill": zero_fill, "recon": recon}


def scan_lines(size, line_counts, cfg=None, threshold=1e-5):
    """First line count whose noiseless reconstruction has error below threshold, else None."""
    for lines in line_counts:
        report, _ = phantom_experiment(size, lines, cfg=cfg)
        if report.relative_error < threshold:
            return lines, report
    return None, None
