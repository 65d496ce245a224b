# theory.py
import itertools
import logging
import math

import numpy as np
import scipy.linalg
from joblib import Parallel, delayed
from scipy.optimize import brentq
from scipy.special import comb, gammaln

from config import ENUM_BUDGET, RANK_TOL
from errors import EnumerationBudgetError, InvalidArgumentError, NoPositiveRootError
from linalg_core import complement_projector, largest_singular_value, null_space_basis, numerical_rank
from models import GuaranteeReport, RipEstimate
from operators import OperatorKind
from projection import dif1d_optimal_select, exhaustive_optimal_select, fused_lasso_optimal_select, project

logger = logging.getLogger(__name__)

DELTA_ROOT_CAP = 0.5
CHUNK = 2_000


# ── Omega-RIP ───────────────────────────────────────────
def _gram_deviation(M):
    M = np.asarray(M, dtype=float)
    return M.T @ M - np.eye(M.shape[1])


def subspace_deviation(G, omega_rows, rank_tol=RANK_TOL):
    """max |<(M*M - I)v, v>| over unit v in null(Omega_L), via its basis."""
    V = null_space_basis(omega_rows, rank_tol, d=G.shape[0])
    if V.shape[1] == 0:
        return 0.0
    return float(np.max(np.abs(scipy.linalg.eigvalsh(V.T @ G @ V))))


def rip_deviation(M, Omega, cosupport):
    return subspace_deviation(_gram_deviation(M), Omega.rows(cosupport))


def projected_operator_norm(M, Omega, cosupport_a, cosupport_b=None):
    """||Q_a (I - M*M) Q_b||_2."""
    G = _gram_deviation(M)
    Qa = complement_projector(Omega.rows(cosupport_a), d=Omega.d).matrix()
    Qb = Qa if cosupport_b is None else complement_projector(Omega.rows(cosupport_b), d=Omega.d).matrix()
    return float(np.linalg.norm(Qa @ G @ Qb, 2))


def _chunk_max(G, dense, subsets, rank_tol, corank=None):
    worst = 0.0
    for subset in subsets:
        rows = dense[list(subset)]
        if corank is not None and numerical_rank(rows, rank_tol) != corank:
            continue
        worst = max(worst, subspace_deviation(G, rows, rank_tol))
    return worst


def _chunks(iterable, size):
    it = iter(iterable)
    while True:
        block = list(itertools.islice(it, size))
        if not block:
            return
        yield block


def _exhaustive(M, Omega, size, workers, budget, corank=None):
    p = Omega.p
    if size < 0 or size > p:
        raise InvalidArgumentError(f"cosupport size {size} outside [0, {p}]")
    count = comb(p, size, exact=True)
    if count > budget:
        raise EnumerationBudgetError(
            f"C({p}, {size}) = {count} cosupports exceeds the budget of {budget}; use sampled mode"
        )
    G = _gram_deviation(M)
    dense = Omega.to_dense()
    parts = Parallel(n_jobs=workers)(
        delayed(_chunk_max)(G, dense, block, RANK_TOL, corank)
        for block in _chunks(itertools.combinations(range(p), size), CHUNK)
    )
    return max(parts, default=0.0)


def omega_rip_exhaustive(M, Omega, l, workers=1, budget=ENUM_BUDGET):
    """delta_l as the worst restricted deviation over every size-l cosupport."""
    delta = _exhaustive(M, Omega, l, workers, budget)
    logger.info(f"exhaustive Omega-RIP: l={l}, delta={delta:.6g}")
    return RipEstimate(l=l, delta=delta, mode="exhaustive")


def omega_rip_corank_exhaustive(M, Omega, r, workers=1, budget=ENUM_BUDGET):
    """delta_r^corank: size-r row sets of rank r cover every corank-r null space."""
    delta = _exhaustive(M, Omega, r, workers, budget, corank=r)
    return RipEstimate(l=r, delta=delta, mode="exhaustive", corank=True)


def omega_rip_sampled(M, Omega, l, trials, seed):
    """Lower bound on delta_l from random cosupports.

    Trial i takes the first l entries of the i-th seeded permutation, so runs
    with the same seed sample nested cosupports for different l.
    """
    if l < 0 or l > Omega.p:
        raise InvalidArgumentError(f"cosparsity l={l} outside [0, {Omega.p}]")
    G = _gram_deviation(M)
    dense = Omega.to_dense()
    rng = np.random.default_rng(seed)
    delta = 0.0
    for _ in range(trials):
        subset = rng.permutation(Omega.p)[:l]
        delta = max(delta, subspace_deviation(G, dense[np.sort(subset)]))
    return RipEstimate(l=l, delta=delta, mode="sampled", trials=trials, seed=seed, is_lower_bound=True)


def estimate_sigma_sq(M):
    return largest_singular_value(M) ** 2


# ── Sample bounds ───────────────────────────────────────
def sample_bound_cosparsity(eps, l, p, C_M=1.0, t=1.0):
    """Measurements sufficient for delta_l <= eps with probability 1 - exp(-t)."""
    if eps <= 0:
        raise InvalidArgumentError("eps must be positive")
    if l < 0 or l > p:
        raise InvalidArgumentError(f"cosparsity l={l} outside [0, {p}]")
    k = p - l
    log_term = k * math.log(9 * p / (k * eps)) if k > 0 else 0.0
    return int(math.ceil(32.0 / (C_M * eps ** 2) * (log_term + t)))


def general_position_corank_log_count(p, r):
    """log of min(C(p, r), (e p / (p - r))^(p - r))."""
    if r >= p:
        return 0.0
    k = p - r
    exact = gammaln(p + 1) - gammaln(r + 1) - gammaln(k + 1)
    stirling = k * math.log(math.e * p / k)
    return float(min(exact, stirling))


def sample_bound_corank(eps, r, d, log_subspaces, C_M=1.0, t=1.0):
    """Measurements sufficient for delta_r^corank <= eps; log_subspaces = log |L_r^corank|."""
    if eps <= 0:
        raise InvalidArgumentError("eps must be positive")
    if r < 0 or r > d:
        raise InvalidArgumentError(f"corank r={r} outside [0, {d}]")
    return int(math.ceil(32.0 / (C_M * eps ** 2) * (log_subspaces + (d - r) * math.log(9 / eps) + t)))


# ── AIHT / AHTP guarantees ──────────────────────────────
def aiht_report(C_l, sigma_sq, delta_2lp, eta, mu=None, y_norm=None, e_norm=None):
    """Constants of the AIHT/AHTP recovery guarantee.

    mu=None uses the optimal-step substitution mu = 1/(1 + delta).
    """
    if eta <= 0:
        raise InvalidArgumentError("eta must be positive")
    if not 0 <= delta_2lp < 1:
        raise InvalidArgumentError("delta_2lp must lie in [0, 1)")
    C, s2, delta = C_l, sigma_sq, delta_2lp
    notes = []

    b1 = eta / (1 + eta)
    b2 = (C - 1) * s2 * b1 ** 2 / (C * (1 - delta))
    ratio = b2 / b1 ** 2
    inv_mu_lower = 1 + delta
    inv_mu_upper = (1 + math.sqrt(1 - ratio)) * b1 * (1 - delta) if ratio < 1 else None

    if mu is None:
        mu = 1 / (1 + delta)
        notes.append("mu set to 1/(1 + delta_2lp) (optimal step)")

    interval = inv_mu_upper is not None and inv_mu_lower < inv_mu_upper and inv_mu_lower <= s2
    admissible = (
        inv_mu_upper is not None
        and inv_mu_lower <= 1 / mu < inv_mu_upper
        and 1 / mu <= s2
    )
    c4 = (
        (1 + 1 / eta) ** 2 * (1 / (mu * (1 - delta)) - 1) * C
        + (C - 1) * (mu * s2 - 1)
        + C / eta ** 2
    )

    t_star = None
    if y_norm is not None and e_norm is not None and 0 < c4 < 1:
        if y_norm <= 0:
            t_star = 0.0
        else:
            ratio_noise = eta * e_norm ** 2 / y_norm ** 2
            t_star = 0.0 if ratio_noise >= 1 else float(math.ceil(math.log(ratio_noise) / math.log(c4)))

    return GuaranteeReport(
        algorithm = "AIHT/AHTP",
        inputs    = {"C_l": C, "sigma_sq": s2, "delta_2lp": delta, "eta": eta, "mu": mu},
        constants = {
            "b1":            b1,
            "b2":            b2,
            "b2_over_b1sq":  ratio,
            "inv_mu_lower":  inv_mu_lower,
            "inv_mu_upper":  inv_mu_upper,
            "mu_lower":      None if inv_mu_upper is None else 1 / min(inv_mu_upper, s2),
            "mu_upper":      1 / inv_mu_lower,
            "c4":            c4,
            "t_star":        t_star,
        },
        conditions = {
            "b2_over_b1sq_below_1":  ratio < 1,
            "mu_interval_nonempty":  bool(interval),
            "mu_admissible":         bool(admissible),
            "c4_below_1":            c4 < 1,
        },
        error_coefficient = (1 + eta) / math.sqrt(1 - delta),
        notes             = notes,
    )


def aiht_delta_boundary(C_l, sigma_sq, eta=1e9):
    """Largest delta_2lp for which the admissible mu interval is non-empty."""
    ratio_at = lambda delta: (C_l - 1) * sigma_sq / (C_l * (1 - delta))
    b1 = eta / (1 + eta)
    delta_max = 1 - (C_l - 1) * sigma_sq / C_l
    if delta_max <= 0:
        return 0.0

    def gap(delta):
        return (1 + math.sqrt(max(1 - ratio_at(delta), 0.0))) * b1 * (1 - delta) - (1 + delta)

    if gap(0.0) <= 0:
        return 0.0
    hi = delta_max * (1 - 1e-12)
    if gap(hi) > 0:
        root = hi
    else:
        root = brentq(gap, 0.0, hi, xtol=1e-14)
    return float(min(root, sigma_sq - 1))


# ── ACoSaMP / ASP guarantees ────────────────────────────
def _delta_root(C, sigma_sq, gamma, tail):
    g = C / (1 + gamma) ** 2
    a0 = (1 + C) * (1 - g + (C - 1) * sigma_sq) - 1
    if a0 >= 0:
        raise NoPositiveRootError(
            f"(1+C)(1 - C/(1+gamma)^2 + (C-1)sigma^2) < 1 fails for C={C}, "
            f"sigma_sq={sigma_sq}, gamma={gamma}"
        )
    b = 2 * (1 + C) * (1 + g)
    c = (1 + C) * (-1 - g + (C - 1) * sigma_sq) + 2 * math.sqrt(C) + tail

    # c x^2 + b x + a0 in x = sqrt(delta); negative at x = 0
    if abs(c) < 1e-14:
        x = -a0 / b
    else:
        disc = b * b - 4 * c * a0
        if disc < 0:
            return DELTA_ROOT_CAP
        sq = math.sqrt(disc)
        roots = [r for r in ((-b + sq) / (2 * c), (-b - sq) / (2 * c)) if r > 0]
        if not roots:
            return DELTA_ROOT_CAP
        x = min(roots)
    return float(min(x * x, DELTA_ROOT_CAP))


def delta_root_acosamp(C_S, sigma_sq, gamma):
    delta = _delta_root(C_S, sigma_sq, gamma, 0.5)
    if C_S == 1 and gamma < 1e-2:
        logger.info(
            f"ACoSaMP delta root at C=1 is {delta:.4f}; the often quoted 0.0156 "
            f"is the root of the ASP quadratic ({_delta_root(C_S, sigma_sq, gamma, 2.0):.4f})"
        )
    return delta


def delta_root_asp(C_S, sigma_sq, gamma):
    return _delta_root(C_S, sigma_sq, gamma, 2.0)


def _check_deltas(**deltas):
    for name, value in deltas.items():
        if not 0 <= value < 1:
            raise InvalidArgumentError(f"{name} must lie in [0, 1), got {value}")


def _geometric_coefficient(q, noise, x_norm, e_norm, notes):
    """1 + (1 - q^t*)/(1 - q) * noise, with t* = ceil(log(||x||/||e||)/log(1/q))."""
    if q >= 1 or noise is None:
        return None, None
    if x_norm is None or e_norm is None or e_norm <= 0:
        notes.append("t* unknown, coefficient uses its t* -> infinity limit")
        return None, 1 + noise / (1 - q)
    if q == 0 or x_norm <= e_norm:
        t_star = 0 if x_norm <= e_norm else 1
    else:
        t_star = math.ceil(math.log(x_norm / e_norm) / math.log(1 / q))
    return float(t_star), 1 + (1 - q ** t_star) / (1 - q) * noise


def _cosamp_constants(C_l, C_2lp, sigma_sq, gamma, d2, d3, d4):
    """Shared constants; entries are None where a radicand fails."""
    notes = []
    eta1 = math.sqrt((2 + C_l) / (1 + C_l) + 2 * math.sqrt(C_l) + C_l) * math.sqrt(1 + d3) / (1 - d4)
    rho1_sq = (1 + 2 * d4 * math.sqrt(C_l) + C_l) / (1 - d4 ** 2)
    zeta = C_2lp / (1 + gamma) ** 2 * (1 - math.sqrt(d2)) ** 2 - (C_2lp - 1) * (1 + d2) * sigma_sq

    zeta_ok = zeta >= 0
    gap_ok = zeta_ok and math.sqrt(zeta) > math.sqrt(d4)
    alpha = eta2 = rho2_sq = None
    if not zeta_ok:
        notes.append("violated: C/(1+gamma)^2 (1-sqrt(delta_2lp))^2 - (C-1)(1+delta_2lp) sigma^2 >= 0")
    elif not gap_ok:
        notes.append("violated: sqrt(zeta) > sqrt(delta_4l3p)")
    else:
        alpha = math.sqrt(d4) / (math.sqrt(zeta) - math.sqrt(d4))
        eta2_sq = (
            (1 + d3) / (gamma * (1 + alpha))
            + (1 + d2) * C_2lp / (gamma * (1 + alpha) * (1 + gamma))
            + (C_2lp - 1) * (1 + gamma) * sigma_sq / ((1 + alpha) * (1 + gamma) * gamma)
        )
        eta2 = math.sqrt(max(eta2_sq, 0.0))
        rho2_sq = 1 - (math.sqrt(d4) - math.sqrt(zeta)) ** 2

    C_S = max(C_l, C_2lp)
    precondition = (1 + C_S) * (1 - (C_S / (1 + gamma) ** 2 - (C_S - 1) * sigma_sq)) < 1
    constants = {
        "eta1":    eta1,
        "eta2":    eta2,
        "rho1":    math.sqrt(rho1_sq),
        "rho2":    None if rho2_sq is None else math.sqrt(max(rho2_sq, 0.0)),
        "rho1_sq": rho1_sq,
        "rho2_sq": rho2_sq,
        "alpha":   alpha,
        "zeta":    zeta,
    }
    return constants, precondition, gap_ok, notes


def acosamp_report(C_l, C_2lp, sigma_sq, gamma, delta_2lp, delta_3l2p, delta_4l3p, x_norm=None, e_norm=None):
    """ACoSaMP constants for a = (2l - p)/l, iteration contraction and final error coefficient."""
    if gamma <= 0:
        raise InvalidArgumentError("gamma must be positive")
    _check_deltas(delta_2lp=delta_2lp, delta_3l2p=delta_3l2p, delta_4l3p=delta_4l3p)
    constants, precondition, gap_ok, notes = _cosamp_constants(
        C_l, C_2lp, sigma_sq, gamma, delta_2lp, delta_3l2p, delta_4l3p
    )

    root = None
    if precondition:
        root = delta_root_acosamp(max(C_l, C_2lp), sigma_sq, gamma)
    constants["delta_root"] = root

    q = noise = None
    if gap_ok:
        q = constants["rho1"] * constants["rho2"]
        noise = constants["eta1"] + constants["rho1"] * constants["eta2"]
    constants["rho1rho2"] = q
    t_star, coefficient = _geometric_coefficient(q if q is not None else 1.0, noise, x_norm, e_norm, notes)
    constants["t_star"] = t_star

    return GuaranteeReport(
        algorithm = "ACoSaMP",
        inputs    = {
            "C_l": C_l, "C_2lp": C_2lp, "sigma_sq": sigma_sq, "gamma": gamma,
            "delta_2lp": delta_2lp, "delta_3l2p": delta_3l2p, "delta_4l3p": delta_4l3p,
        },
        constants  = constants,
        conditions = {
            "precondition":          precondition,
            "radicands_valid":       gap_ok,
            "delta_4l3p_below_root": root is not None and delta_4l3p <= root,
            "contraction_below_1":   q is not None and q ** 2 < 1,
        },
        error_coefficient = coefficient,
        notes             = notes,
    )


def asp_report(C_l, C_2lp, sigma_sq, gamma, delta_2lp, delta_3l2p, delta_4l3p, x_norm=None, e_norm=None):
    """ASP: ACoSaMP constants scaled by (1 + delta_2lp)/(1 - delta_2lp), plus 2/(1 - delta_2lp) noise."""
    if gamma <= 0:
        raise InvalidArgumentError("gamma must be positive")
    _check_deltas(delta_2lp=delta_2lp, delta_3l2p=delta_3l2p, delta_4l3p=delta_4l3p)
    constants, precondition, gap_ok, notes = _cosamp_constants(
        C_l, C_2lp, sigma_sq, gamma, delta_2lp, delta_3l2p, delta_4l3p
    )

    root = None
    if precondition:
        root = delta_root_asp(max(C_l, C_2lp), sigma_sq, gamma)
    constants["delta_root"] = root

    factor = (1 + delta_2lp) / (1 - delta_2lp)
    q = noise = None
    if gap_ok:
        q = factor * constants["rho1"] * constants["rho2"]
        noise = factor * (constants["eta1"] + constants["rho1"] * constants["eta2"]) + 2 / (1 - delta_2lp)
    constants["ls_factor"] = factor
    constants["contraction"] = q
    constants["noise_factor"] = noise
    t_star, coefficient = _geometric_coefficient(q if q is not None else 1.0, noise, x_norm, e_norm, notes)
    constants["t_star"] = t_star

    return GuaranteeReport(
        algorithm = "ASP",
        inputs    = {
            "C_l": C_l, "C_2lp": C_2lp, "sigma_sq": sigma_sq, "gamma": gamma,
            "delta_2lp": delta_2lp, "delta_3l2p": delta_3l2p, "delta_4l3p": delta_4l3p,
        },
        constants  = constants,
        conditions = {
            "precondition":          precondition,
            "radicands_valid":       gap_ok,
            "delta_4l3p_below_root": root is not None and delta_4l3p <= root,
            "contraction_below_1":   q is not None and q < 1,
        },
        error_coefficient = coefficient,
        notes             = notes,
    )


def boundary_table(C_values=(1.0, 1.05, 1.1), sigma_sq=5.0, eta=1e9, gamma=1e-3):
    """Feasibility boundaries per near-optimality constant."""
    rows = []
    for C in C_values:
        row = {"C": C, "sigma_sq": sigma_sq, "aiht": aiht_delta_boundary(C, sigma_sq, eta)}
        for name, fn in (("acosamp", delta_root_acosamp), ("asp", delta_root_asp)):
            try:
                row[name] = fn(C, sigma_sq, gamma)
            except NoPositiveRootError:
                row[name] = None
        rows.append(row)
    return rows


# ── Non-exact cosparse signals ──────────────────────────
def best_cosparse_approximation(x, Omega, l):
    """x^l = Q_{S*(x)} x with an optimal selection."""
    if Omega.kind == OperatorKind.DIF1D:
        cosupport = dif1d_optimal_select(x, l)
    elif Omega.kind == OperatorKind.FUSED:
        cosupport = fused_lasso_optimal_select(x, l)
    else:
        cosupport = exhaustive_optimal_select(Omega, x, l)
    return project(Omega, cosupport, x)


def nonexact_bound(report, x, Omega, M, l, e_norm=0.0):
    """||x - x^l|| + c ||M (x - x^l)|| + c ||e||."""
    c = report.error_coefficient
    if c is None:
        raise InvalidArgumentError(f"{report.algorithm} report has no finite error coefficient")
    x = np.asarray(x, dtype=float)
    tail = x - best_cosparse_approximation(x, Omega, l)
    M_tail = np.asarray(M) @ tail if isinstance(M, np.ndarray) else M.matvec(tail)
    return float(np.linalg.norm(tail) + c * np.linalg.norm(M_tail) + c * e_norm)
