# projection.py
import itertools
import logging

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.special import comb

from config import ENUM_BUDGET, RANK_TOL
from errors import EnumerationBudgetError, InvalidArgumentError
from linalg_core import complement_projector, null_space_basis
from models import SchemeKind
from operators import Cosupport, OperatorKind, smallest_coefficients_cosupport

logger = logging.getLogger(__name__)


# ── Projection onto a cosupport ─────────────────────────
class CosupportProjector:
    """Q_L for a fixed operator and cosupport.

    Difference operators project by averaging over the connected components
    of the graph formed by the difference rows in L (fused-lasso components
    touching an identity row in L are set to zero). Identity zeroes entries.
    Dense kinds go through the SVD projector.
    """

    def __init__(self, Omega, cosupport, rank_tol=RANK_TOL):
        self.Omega     = Omega
        self.cosupport = cosupport
        self._dense    = None
        self._labels   = None
        self._rank_tol = rank_tol

        kind = Omega.kind
        if kind == OperatorKind.IDENTITY:
            self._keep = ~cosupport.mask()
        elif kind == OperatorKind.DIF1D:
            breaks = np.setdiff1d(np.arange(Omega.p), cosupport.indices)
            self._starts = np.concatenate([[0], breaks + 1])
        elif Omega.is_difference:
            self._build_components(cosupport)
        else:
            self._dense = complement_projector(Omega.rows(cosupport), rank_tol, d=Omega.d)

    def _build_components(self, cosupport):
        Omega = self.Omega
        idx = cosupport.indices
        diff = idx[idx < Omega.n_diff]
        graph = sp.coo_matrix(
            (np.ones(diff.size), (Omega.tails[diff], Omega.heads[diff])),
            shape=(Omega.d, Omega.d),
        )
        n_comp, labels = connected_components(graph, directed=False)
        self._labels = labels
        self._counts = np.bincount(labels, minlength=n_comp)
        self._zeroed = np.zeros(n_comp, dtype=bool)
        zero_nodes = idx[idx >= Omega.n_diff] - Omega.n_diff
        if zero_nodes.size:
            self._zeroed[labels[zero_nodes]] = True

    def apply(self, z):
        z = np.asarray(z, dtype=float)
        kind = self.Omega.kind
        if kind == OperatorKind.IDENTITY:
            return np.where(self._keep, z, 0.0)
        if kind == OperatorKind.DIF1D:
            lengths = np.diff(np.concatenate([self._starts, [z.size]]))
            means = np.add.reduceat(z, self._starts) / lengths
            return np.repeat(means, lengths)
        if self._labels is not None:
            means = np.bincount(self._labels, weights=z, minlength=self._counts.size) / self._counts
            means[self._zeroed] = 0.0
            return means[self._labels]
        return self._dense.apply(z)

    def basis(self):
        """Orthonormal d x r basis of range(Q_L)."""
        Omega = self.Omega
        d = Omega.d
        if Omega.kind == OperatorKind.IDENTITY:
            return np.eye(d)[:, self._keep]
        if Omega.kind == OperatorKind.DIF1D:
            counts = np.diff(np.concatenate([self._starts, [d]]))
            labels = np.repeat(np.arange(counts.size), counts)
            zeroed = np.zeros(counts.size, dtype=bool)
        elif self._labels is not None:
            labels, counts, zeroed = self._labels, self._counts, self._zeroed
        else:
            return null_space_basis(Omega.rows(self.cosupport), self._rank_tol, d=d)
        B = np.zeros((d, counts.size))
        B[np.arange(d), labels] = 1.0 / np.sqrt(counts[labels])
        return B[:, ~zeroed]


def project(Omega, cosupport, z):
    """Q_L z."""
    return CosupportProjector(Omega, cosupport).apply(z)


def projection_error(Omega, cosupport, z):
    z = np.asarray(z, dtype=float)
    return float(np.linalg.norm(z - project(Omega, cosupport, z)))


# ── Selection schemes ───────────────────────────────────
def threshold_select(Omega, z, l):
    return smallest_coefficients_cosupport(Omega, z, l)


def exhaustive_optimal_select(Omega, z, l, budget=ENUM_BUDGET):
    """Best size-l cosupport by enumeration; ties go to the lexicographically first."""
    p = Omega.p
    if l < 0 or l > p:
        raise InvalidArgumentError(f"cosparsity l={l} outside [0, {p}]")
    count = comb(p, l, exact=True)
    if count > budget:
        raise EnumerationBudgetError(
            f"C({p}, {l}) = {count} cosupports exceeds the budget of {budget}; "
            f"use a structured DP scheme or thresholding"
        )
    z = np.asarray(z, dtype=float)
    best, best_err = None, np.inf
    for subset in itertools.combinations(range(p), l):
        candidate = Cosupport(subset, p)
        err = float(np.sum((z - project(Omega, candidate, z)) ** 2))
        if err < best_err:
            best, best_err = candidate, err
    return best


def _prefix_sums(z):
    s1 = np.concatenate([[0.0], np.cumsum(z)])
    s2 = np.concatenate([[0.0], np.cumsum(z * z)])
    return s1, s2


def _segment_sse(s1, s2, starts, end):
    """Within-segment squared error of z[a:end] about its mean, for each a in starts."""
    n = end - starts
    total = s1[end] - s1[starts]
    sse = (s2[end] - s2[starts]) - total * total / n
    return np.maximum(sse, 0.0)


def dif1d_optimal_select(z, l):
    """Optimal piecewise-constant fit with p - l change points (p = d - 1)."""
    z = np.asarray(z, dtype=float)
    d = z.size
    p = d - 1
    if l < 0 or l > p:
        raise InvalidArgumentError(f"cosparsity l={l} outside [0, {p}]")
    segments = p - l + 1
    s1, s2 = _prefix_sums(z)

    # cost[j, L]: best error of z[:L] split into j segments
    cost = np.full((segments + 1, d + 1), np.inf)
    back = np.zeros((segments + 1, d + 1), dtype=np.int64)
    cost[0, 0] = 0.0
    for j in range(1, segments + 1):
        for L in range(j, d + 1):
            starts = np.arange(j - 1, L)
            total = cost[j - 1, starts] + _segment_sse(s1, s2, starts, L)
            best = int(np.argmin(total))
            cost[j, L] = total[best]
            back[j, L] = starts[best]

    change_rows = []
    L = d
    for j in range(segments, 0, -1):
        a = back[j, L]
        if a > 0:
            change_rows.append(a - 1)
        L = a
    excluded = np.zeros(p, dtype=bool)
    excluded[change_rows] = True
    return Cosupport.from_mask(~excluded)


def fused_lasso_optimal_select(z, l):
    """Optimal fused-lasso projection: k1 change points plus k2 nonzero entries, k1 + k2 <= p - l.

    I[b, L, w, k1] is the best error of z[:L] using budget exactly b with k1
    change points, the last block zero (w=0) or free (w=1). Two zero blocks
    are never adjacent. The optimum over budgets <= k equals the optimum over
    cosupports of size exactly l, so the returned cosupport may hold more
    than l rows when a cheaper configuration is already optimal.
    """
    z = np.asarray(z, dtype=float)
    d = z.size
    p = 2 * d - 1
    if l < 0 or l > p:
        raise InvalidArgumentError(f"cosparsity l={l} outside [0, {p}]")
    k = p - l
    k1_max = min(k, d - 1)
    s1, s2 = _prefix_sums(z)

    I       = np.full((k + 1, d + 1, 2, k1_max + 1), np.inf)
    back_a  = np.zeros(I.shape, dtype=np.int64)
    back_w  = np.zeros(I.shape, dtype=np.int64)

    # ── single block z[:L] ──
    for L in range(1, d + 1):
        I[0, L, 0, 0] = s2[L]
        if L <= k:
            I[L, L, 1, 0] = _segment_sse(s1, s2, np.array([0]), L)[0]

    # ── last block z[a:L] after k1 - 1 earlier change points ──
    for k1 in range(1, k1_max + 1):
        for L in range(k1 + 1, d + 1):
            starts = np.arange(k1, L)
            zero_cost = s2[L] - s2[starts]
            free_cost = _segment_sse(s1, s2, starts, L)
            for b in range(1, k + 1):
                # zero block: one change point, previous block free
                total = zero_cost + I[b - 1, starts, 1, k1 - 1]
                best = int(np.argmin(total))
                if total[best] < I[b, L, 0, k1]:
                    I[b, L, 0, k1] = total[best]
                    back_a[b, L, 0, k1] = starts[best]
                    back_w[b, L, 0, k1] = 1

                # free block: one change point plus its length
                prev_b = b - 1 - (L - starts)
                ok = prev_b >= 0
                if not np.any(ok):
                    continue
                for w_prev in (0, 1):
                    total = np.full(starts.size, np.inf)
                    total[ok] = free_cost[ok] + I[prev_b[ok], starts[ok], w_prev, k1 - 1]
                    best = int(np.argmin(total))
                    if total[best] < I[b, L, 1, k1]:
                        I[b, L, 1, k1] = total[best]
                        back_a[b, L, 1, k1] = starts[best]
                        back_w[b, L, 1, k1] = w_prev

    final = I[:, d, :, :]
    b, w, k1 = np.unravel_index(int(np.argmin(final)), final.shape)
    logger.debug(f"fused-lasso DP: error={final[b, w, k1]:.6g}, budget={b}/{k}, change points={k1}")

    excluded = np.zeros(p, dtype=bool)
    L = d
    while True:
        if k1 == 0:
            a = 0
        else:
            a = back_a[b, L, w, k1]
            excluded[a - 1] = True
        if w == 1:
            excluded[(d - 1) + np.arange(a, L)] = True
        if k1 == 0:
            break
        w_prev = back_w[b, L, w, k1]
        b = b - 1 - (L - a if w == 1 else 0)
        L, w, k1 = a, w_prev, k1 - 1
    return Cosupport.from_mask(~excluded)


# ── Scheme registry ─────────────────────────────────────
class ProjectionScheme:
    def __init__(self, kind, select, applicable=None):
        self.kind       = SchemeKind(kind)
        self._select    = select
        self.applicable = applicable

    def check(self, Omega):
        if self.applicable is not None and Omega.kind not in self.applicable:
            raise InvalidArgumentError(
                f"scheme {self.kind.value} only applies to "
                f"{', '.join(k.value for k in self.applicable)} operators, got {Omega.kind.value}"
            )

    def select(self, Omega, z, l):
        self.check(Omega)
        return self._select(Omega, z, l)

    def __repr__(self):
        return f"ProjectionScheme({self.kind.value})"


SCHEMES = {
    SchemeKind.THRESHOLDING: ProjectionScheme(SchemeKind.THRESHOLDING, threshold_select),
    SchemeKind.EXHAUSTIVE:   ProjectionScheme(SchemeKind.EXHAUSTIVE, exhaustive_optimal_select),
    SchemeKind.DIF1D_DP:     ProjectionScheme(
        SchemeKind.DIF1D_DP,
        lambda Omega, z, l: dif1d_optimal_select(z, l),
        applicable=(OperatorKind.DIF1D,),
    ),
    SchemeKind.FUSED_DP:     ProjectionScheme(
        SchemeKind.FUSED_DP,
        lambda Omega, z, l: fused_lasso_optimal_select(z, l),
        applicable=(OperatorKind.FUSED,),
    ),
}


def get_scheme(kind, Omega=None):
    """Look up a scheme; `auto` picks the exact DP when the operator has one."""
    kind = SchemeKind(kind)
    if kind == SchemeKind.AUTO:
        if Omega is not None and Omega.kind == OperatorKind.DIF1D:
            kind = SchemeKind.DIF1D_DP
        elif Omega is not None and Omega.kind == OperatorKind.FUSED:
            kind = SchemeKind.FUSED_DP
        else:
            kind = SchemeKind.THRESHOLDING
    if kind not in SCHEMES:
        raise ValueError(f"Unsupported projection scheme: {kind}")
    scheme = SCHEMES[kind]
    if Omega is not None:
        scheme.check(Omega)
    return scheme


def empirical_near_optimality(Omega, scheme, l, trials, seed, sampler=None):
    """Largest observed ||z - Q_S(z) z||^2 / ||z - Q_opt z||^2 over random z.

    A lower bound on the near-optimality constant of `scheme`. `sampler(rng)`
    draws test signals; standard Gaussian by default.
    """
    scheme = get_scheme(scheme, Omega) if not isinstance(scheme, ProjectionScheme) else scheme
    rng = np.random.default_rng(seed)
    worst, used = 1.0, 0
    for _ in range(trials):
        z = sampler(rng) if sampler is not None else rng.standard_normal(Omega.d)
        scale = float(np.sum(z * z))
        optimal = projection_error(Omega, exhaustive_optimal_select(Omega, z, l), z) ** 2
        if optimal <= 1e-15 * max(scale, 1.0):
            continue
        achieved = projection_error(Omega, scheme.select(Omega, z, l), z) ** 2
        worst = max(worst, achieved / optimal)
        used += 1
    if used == 0:
        logger.warning("near-optimality: every trial signal was already cosparse")
    return worst
