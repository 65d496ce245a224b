# solvers.py
import logging
import math

import numpy as np
from scipy.optimize import minimize_scalar

from errors import DivergenceError, InsufficientMeasurementsError, InvalidArgumentError
from linalg_core import (
    as_operator, constrained_least_squares, largest_singular_value, penalized_least_squares,
    restricted_least_squares,
)
from models import SolverConfig, SolverResult, StepRule, StopRule, Variant
from operators import Cosupport
from projection import CosupportProjector, get_scheme

logger = logging.getLogger(__name__)

DIVERGENCE_FACTOR   = 1e12
DIRECT_SOLVE_MAX_D  = 4096


# ── Iteration bookkeeping ───────────────────────────────
class IterationLog:
    """Residual history, warnings, stopping and divergence checks."""

    def __init__(self, cfg, y):
        self.cfg       = cfg
        self.y_norm    = float(np.linalg.norm(y))
        self.residuals = []
        self.warnings  = []
        self.iterates  = [] if cfg.record_iterates else None

    def record(self, x, residual_norm):
        if self.y_norm > 0 and residual_norm > DIVERGENCE_FACTOR * self.y_norm:
            raise DivergenceError(
                f"residual {residual_norm:.3e} exceeds {DIVERGENCE_FACTOR:.0e} * ||y||; "
                f"the step size is probably too large"
            )
        self.residuals.append(float(residual_norm))
        if self.iterates is not None:
            self.iterates.append(np.array(x, copy=True))

    def warn(self, message):
        if message not in self.warnings:
            logger.warning(message)
            self.warnings.append(message)

    def should_stop(self, x_new, x_old):
        stop = self.cfg.stop
        if stop == StopRule.MAX_ONLY:
            return False
        if stop in (StopRule.DEFAULT, StopRule.RESIDUAL):
            if self.residuals[-1] <= self.cfg.residual_tol * self.y_norm:
                return True
        if stop in (StopRule.DEFAULT, StopRule.CHANGE):
            change = np.linalg.norm(x_new - x_old)
            if change <= self.cfg.change_tol * np.linalg.norm(x_new):
                return True
        return False

    def result(self, variant_name, x, cosupport, l, converged):
        return SolverResult(
            variant           = variant_name,
            x_hat             = x,
            cosupport         = cosupport,
            target_cosparsity = l,
            iterations        = len(self.residuals) - 1,
            residual_history  = self.residuals,
            converged         = converged,
            warnings          = self.warnings,
            iterates          = self.iterates,
        )


def _check_inputs(problem, Omega, l):
    if Omega.d != problem.d:
        raise InvalidArgumentError(f"operator acts on R^{Omega.d} but M has {problem.d} columns")
    if l < 0 or l > Omega.p:
        raise InvalidArgumentError(f"cosparsity l={l} outside [0, {Omega.p}]")


def _penalty_gram(Omega, cosupport):
    mask = cosupport.mask().astype(float)
    return lambda v: Omega.adjoint(mask * Omega.apply(v))


def _least_squares(A, y, Omega, cosupport, cfg, x0, log, dense=None):
    """Objective-aware projection onto the cosupport, hard or relaxed.

    Hard projections with a dense M solve on a basis of the cosupport's
    null space. An underdetermined system returns the minimizer closest
    to x0.
    """
    if cfg.variant.relaxed:
        x, ok = penalized_least_squares(
            A, y, _penalty_gram(Omega, cosupport), cfg.lam,
            x0=x0, tol=cfg.cg_tol, max_iter=cfg.cg_max_iter,
        )
    else:
        projector = CosupportProjector(Omega, cosupport)
        if dense is not None:
            return restricted_least_squares(dense, y, projector.basis(), x0=x0)
        x, ok = constrained_least_squares(
            A, y, projector, x0=x0, tol=cfg.cg_tol, max_iter=cfg.cg_max_iter,
        )
    if not ok:
        log.warn("inner least-squares solve stopped before reaching its tolerance")
    return x


def _dense_measurements(problem, Omega):
    """problem.M when a direct restricted solve is affordable, else None."""
    if isinstance(problem.M, np.ndarray) and Omega.d <= DIRECT_SOLVE_MAX_D:
        return problem.M
    return None


def resolve_step(cfg, M):
    """cfg with a concrete constant step; mu=None becomes 1/||M||_2^2."""
    if cfg.mu is not None:
        return cfg
    if isinstance(M, np.ndarray):
        sigma = float(np.linalg.norm(M, 2))
    else:
        sigma = largest_singular_value(M)
    mu = 1.0 / sigma ** 2 if sigma > 0 else 1.0
    logger.debug(f"constant step set to 1/||M||^2 = {mu:.4g}")
    return cfg.model_copy(update={"mu": mu})


# ── Step size ───────────────────────────────────────────
class StepState:
    """What a step rule needs at iteration t."""

    def __init__(self, A, y, Omega, l, x_prev, gradient, prev_cosupport, scheme, update):
        self.A              = A
        self.y              = y
        self.Omega          = Omega
        self.l              = l
        self.x_prev         = x_prev
        self.gradient       = gradient
        self.prev_cosupport = prev_cosupport
        self.scheme         = scheme
        self.update         = update

    def objective(self, mu):
        """||y - M x_t(mu)||^2 with selection and projection rerun at mu."""
        x_g = self.x_prev + mu * self.gradient
        cosupport = self.scheme.select(self.Omega, x_g, self.l)
        x = self.update(x_g, cosupport)
        r = self.y - self.A.matvec(x)
        return float(r @ r)


def adaptive_step(state):
    """mu = ||Q g||^2 / ||M Q g||^2 on S_l(g) intersected with the previous cosupport."""
    g = state.gradient
    target = state.scheme.select(state.Omega, g, state.l).intersect(state.prev_cosupport)
    qg = CosupportProjector(state.Omega, target).apply(g)
    mqg = state.A.matvec(qg)
    den = float(mqg @ mqg)
    if den == 0.0:
        return 0.0, "adaptive step: ||M Q g|| = 0, step set to zero"
    return float(qg @ qg) / den, None


def optimal_step(state, cfg):
    """Bounded line search over (0, mu_max] plus a few fixed candidates.

    Brent's bounded method falls back to golden-section steps, so on a
    unimodal objective it finds the same minimizer as a plain golden-section
    search. The objective is piecewise in mu (the cosupport changes with the
    step), so the best of the search result, cfg.mu and an even grid wins.
    """
    search = minimize_scalar(
        state.objective,
        bounds  = (0.0, cfg.mu_max),
        method  = "bounded",
        options = {"maxiter": 40},
    )
    candidates = [mu for mu in (cfg.mu, float(search.x)) if mu is not None]
    candidates.extend(np.linspace(cfg.mu_max / 16, cfg.mu_max, 16).tolist())
    values = [state.objective(mu) for mu in candidates]
    return candidates[int(np.argmin(values))], None


def step_size(rule, state, cfg):
    """Returns (mu, warning or None)."""
    rule = StepRule(rule)
    if rule == StepRule.CONSTANT:
        return cfg.mu, None
    if rule == StepRule.ADAPTIVE:
        return adaptive_step(state)
    return optimal_step(state, cfg)


# ── AIHT / AHTP ─────────────────────────────────────────
def _projected_gradient(problem, Omega, l, cfg, least_squares):
    _check_inputs(problem, Omega, l)
    A = as_operator(problem.M)
    y = np.asarray(problem.y, dtype=float)
    cfg = resolve_step(cfg, problem.M)
    scheme = get_scheme(cfg.scheme, Omega)
    dense = _dense_measurements(problem, Omega)
    log = IterationLog(cfg, y)

    def update(x_g, cosupport, x0=None):
        if least_squares:
            return _least_squares(A, y, Omega, cosupport, cfg, x_g if x0 is None else x0, log, dense)
        return CosupportProjector(Omega, cosupport).apply(x_g)

    x = np.zeros(Omega.d)
    cosupport = Cosupport.full(Omega.p)
    log.record(x, np.linalg.norm(y))
    logger.debug(f"{cfg.variant.value}: l={l}, m={problem.m}, d={Omega.d}, step={cfg.step_rule.value}")

    converged = cfg.stop == StopRule.MAX_ONLY
    for t in range(1, cfg.max_iters + 1):
        g = A.rmatvec(y - A.matvec(x))
        state = StepState(A, y, Omega, l, x, g, cosupport, scheme, update)
        mu, note = step_size(cfg.step_rule, state, cfg)
        if note:
            log.warn(note)
        x_g = x + mu * g
        cosupport = scheme.select(Omega, x_g, l)
        x_new = update(x_g, cosupport, x0=x)
        log.record(x_new, np.linalg.norm(y - A.matvec(x_new)))
        done = log.should_stop(x_new, x)
        x = x_new
        if done:
            converged = True
            break

    logger.debug(f"{cfg.variant.value}: {len(log.residuals) - 1} iterations, residual={log.residuals[-1]:.3e}")
    return log.result(cfg.variant.value, x, cosupport, l, converged)


def aiht(problem, Omega, l, cfg=None):
    cfg = cfg or SolverConfig(variant=Variant.AIHT)
    return _projected_gradient(problem, Omega, l, cfg, least_squares=False)


def ahtp(problem, Omega, l, cfg=None):
    """AHTP, or RAHTP when cfg.variant is the relaxed form."""
    cfg = cfg or SolverConfig(variant=Variant.AHTP)
    return _projected_gradient(problem, Omega, l, cfg, least_squares=True)


# ── ACoSaMP / ASP ───────────────────────────────────────
def expansion_size(cfg, l, p):
    """a*l rounded and clamped to [1, p]; a_fraction=None means a = (2l - p)/l."""
    raw = (2 * l - p) if cfg.a_fraction is None else cfg.a_fraction * l
    return int(min(max(round(raw), 1), p))


def _cosamp_family(problem, Omega, l, cfg, final_least_squares):
    _check_inputs(problem, Omega, l)
    A = as_operator(problem.M)
    y = np.asarray(problem.y, dtype=float)
    scheme = get_scheme(cfg.scheme, Omega)
    dense = _dense_measurements(problem, Omega)
    l_delta = expansion_size(cfg, l, Omega.p)
    log = IterationLog(cfg, y)

    x = np.zeros(Omega.d)
    cosupport = Cosupport.full(Omega.p)
    residual = y.copy()
    log.record(x, np.linalg.norm(residual))
    logger.debug(f"{cfg.variant.value}: l={l}, a*l={l_delta}, m={problem.m}, d={Omega.d}")

    converged = cfg.stop == StopRule.MAX_ONLY
    for t in range(1, cfg.max_iters + 1):
        # 1) new cosupport candidates from the residual proxy
        proxy = A.rmatvec(residual)
        new_rows = scheme.select(Omega, proxy, l_delta)

        # 2) shrink the cosupport
        merged = cosupport.intersect(new_rows)
        if len(merged) == 0:
            log.warn("empty cosupport intersection, using the new candidates alone")
            merged = new_rows

        # 3) temporary estimate and new cosupport
        w = _least_squares(A, y, Omega, merged, cfg, x, log, dense)
        cosupport = scheme.select(Omega, w, l)

        # 4) final projection of this iteration
        if final_least_squares:
            x_new = _least_squares(A, y, Omega, cosupport, cfg, w, log, dense)
        else:
            x_new = CosupportProjector(Omega, cosupport).apply(w)

        residual = y - A.matvec(x_new)
        log.record(x_new, np.linalg.norm(residual))
        done = log.should_stop(x_new, x)
        x = x_new
        if done:
            converged = True
            break

    logger.debug(f"{cfg.variant.value}: {len(log.residuals) - 1} iterations, residual={log.residuals[-1]:.3e}")
    return log.result(cfg.variant.value, x, cosupport, l, converged)


def acosamp(problem, Omega, l, cfg=None):
    """ACoSaMP, or RACoSaMP when cfg.variant is the relaxed form."""
    cfg = cfg or SolverConfig(variant=Variant.ACOSAMP)
    return _cosamp_family(problem, Omega, l, cfg, final_least_squares=False)


def asp(problem, Omega, l, cfg=None):
    """ASP, or RASP when cfg.variant is the relaxed form."""
    cfg = cfg or SolverConfig(variant=Variant.ASP)
    return _cosamp_family(problem, Omega, l, cfg, final_least_squares=True)


SOLVERS = {
    Variant.AIHT:     aiht,
    Variant.AHTP:     ahtp,
    Variant.RAHTP:    ahtp,
    Variant.ACOSAMP:  acosamp,
    Variant.RACOSAMP: acosamp,
    Variant.ASP:      asp,
    Variant.RASP:     asp,
}


def solve(problem, Omega, l, cfg):
    return SOLVERS[cfg.variant](problem, Omega, l, cfg)


# ── Targeted cosparsity ─────────────────────────────────
def targeted_cosparsity(kind, d, m, l):
    """Cosparsity passed to the solvers so that kappa(l) <= m/2.

    general-position: min(floor(d - m/2), l); dif: ceil(min((-1/sqrt2 + sqrt(2d - m - 1.5))^2, l)).
    """
    if kind == "general-position":
        if m > d:
            raise InvalidArgumentError(f"general-position rule needs m <= d, got m={m}, d={d}")
        cap = math.floor(d - m / 2)
    elif kind == "dif":
        radicand = 2 * d - m - 1.5
        if radicand < 0:
            raise InsufficientMeasurementsError(f"DIF rule undefined for d={d}, m={m}")
        cap = (-1 / math.sqrt(2) + math.sqrt(radicand)) ** 2
    else:
        raise InvalidArgumentError(f"Unsupported targeted-cosparsity kind: {kind}")
    if cap <= 0:
        raise InsufficientMeasurementsError(
            f"targeted cosparsity is non-positive for d={d}, m={m}"
        )
    return int(math.ceil(min(cap, l)))


def dif_kappa_bound(d, l):
    """Lower bound d - l/2 - sqrt(l/2) - 1 on kappa for difference operators."""
    return d - l / 2 - math.sqrt(l / 2) - 1
