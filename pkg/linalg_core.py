# linalg_core.py
import logging

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import LinearOperator, aslinearoperator, cg

from config import RANK_TOL
from errors import InvalidDimensionError, IterationBudgetError

logger = logging.getLogger(__name__)


def as_operator(M):
    """Wrap a dense array, sparse matrix or LinearOperator as a LinearOperator."""
    if isinstance(M, LinearOperator):
        return M
    return aslinearoperator(M)


# ── Singular values ─────────────────────────────────────
def largest_singular_value(M, tol=1e-10, max_iter=10_000):
    """Power iteration on M*M from the normalized all-ones vector."""
    A = as_operator(M)
    d = A.shape[1]
    v = np.ones(d) / np.sqrt(d)
    lam = 0.0
    restarted = False
    for _ in range(max_iter):
        w = A.rmatvec(A.matvec(v))
        norm_w = np.linalg.norm(w)
        if norm_w == 0.0:
            if restarted:
                return 0.0
            # all-ones start lies in null(M); one seeded restart tells a zero M apart
            restarted = True
            v = np.random.default_rng(0).standard_normal(d)
            v /= np.linalg.norm(v)
            continue
        v = w / norm_w
        lam_new = float(np.linalg.norm(A.matvec(v)) ** 2)
        if abs(lam_new - lam) <= tol * lam_new:
            return float(np.sqrt(lam_new))
        lam = lam_new
    raise IterationBudgetError(
        f"power iteration did not reach tol={tol} within {max_iter} iterations"
    )


# ── Projectors ──────────────────────────────────────────
class SubspaceProjector:
    """Orthogonal projector given by an orthonormal basis.

    With complement=True the projector maps onto the orthogonal complement
    of span(basis), i.e. I - B B^T.
    """

    def __init__(self, basis, complement=False):
        basis = np.asarray(basis, dtype=float)
        if basis.ndim != 2:
            raise InvalidDimensionError("projector basis must be a d x r array")
        self.basis      = basis
        self.complement = complement
        self.dimension  = basis.shape[0]

    @property
    def rank(self):
        r = self.basis.shape[1]
        return self.dimension - r if self.complement else r

    def apply(self, z):
        z = np.asarray(z, dtype=float)
        if self.basis.shape[1] == 0:
            return z.copy() if self.complement else np.zeros_like(z)
        onto = self.basis @ (self.basis.T @ z)
        return z - onto if self.complement else onto

    def matrix(self):
        return self.apply(np.eye(self.dimension))


def complement_projector(omega_rows, rank_tol=RANK_TOL, d=None):
    """Q = I - pinv(rows) @ rows, through the row space of the SVD."""
    rows = np.asarray(omega_rows, dtype=float)
    if rows.ndim != 2:
        raise InvalidDimensionError("omega_rows must be a 2-D array")
    d = rows.shape[1] if d is None else d
    if rows.shape[0] == 0:
        return SubspaceProjector(np.zeros((d, 0)), complement=True)
    _, s, vt = scipy.linalg.svd(rows, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return SubspaceProjector(np.zeros((d, 0)), complement=True)
    r = int(np.sum(s > rank_tol * s[0]))
    return SubspaceProjector(vt[:r].T, complement=True)


def null_space_basis(omega_rows, rank_tol=RANK_TOL, d=None):
    rows = np.asarray(omega_rows, dtype=float)
    d = rows.shape[1] if d is None else d
    if rows.shape[0] == 0:
        return np.eye(d)
    return scipy.linalg.null_space(rows, rcond=rank_tol)


def numerical_rank(rows, rank_tol=RANK_TOL):
    rows = np.asarray(rows, dtype=float)
    if rows.size == 0:
        return 0
    s = scipy.linalg.svdvals(rows)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > rank_tol * s[0]))


# ── Least squares ───────────────────────────────────────
def restricted_least_squares(M, y, basis, x0=None):
    """argmin ||y - Mv||^2 over v in span(basis), by a dense lstsq.

    `basis` is an orthonormal d x r array. When M @ basis is rank deficient
    the minimizer closest to x0 is returned.
    """
    M = np.asarray(M, dtype=float)
    y = np.asarray(y, dtype=float)
    d, r = basis.shape
    if r == 0:
        return np.zeros(d)
    MB = M @ basis
    z, _, rank, _ = np.linalg.lstsq(MB, y, rcond=None)
    if rank < r and x0 is not None:
        z0 = basis.T @ x0
        z = z0 + np.linalg.lstsq(MB, y - MB @ z0, rcond=None)[0]
    return basis @ z


def constrained_least_squares(M, y, projector, x0=None, tol=1e-10, max_iter=None):
    """argmin ||y - Mv||^2 s.t. v in range(projector), by CG on Q M*M Q.

    `projector` is anything with an `apply` method (a SubspaceProjector or a
    cosupport projector) or a dense array of analysis rows. CG starts from
    Q x0, so an underdetermined system returns the minimizer closest to it.
    Returns (x_hat, converged).
    """
    if isinstance(projector, np.ndarray):
        projector = complement_projector(projector)
    A = as_operator(M)
    d = A.shape[1]
    Q = projector.apply

    b = Q(A.rmatvec(np.asarray(y, dtype=float)))
    if not np.any(b):
        return np.zeros(d), True

    normal = LinearOperator(
        shape  = (d, d),
        matvec = lambda v: Q(A.rmatvec(A.matvec(Q(v)))),
        dtype  = float,
    )
    start = None if x0 is None else Q(np.asarray(x0, dtype=float))
    w, info = cg(normal, b, x0=start, rtol=tol, atol=0.0, maxiter=max_iter)
    if info != 0:
        logger.warning(f"CG stopped without reaching tol={tol} (info={info})")
    return Q(w), info == 0


def penalized_least_squares(M, y, penalty_gram, lam, x0=None, tol=1e-10, max_iter=None):
    """argmin ||y - Mx||^2 + lam * ||Omega_L x||^2 by CG on the normal equations.

    `penalty_gram(v)` must return Omega_L^* Omega_L v.
    Returns (x_hat, converged).
    """
    A = as_operator(M)
    d = A.shape[1]
    b = A.rmatvec(np.asarray(y, dtype=float))
    if not np.any(b):
        return np.zeros(d), True

    normal = LinearOperator(
        shape  = (d, d),
        matvec = lambda v: A.rmatvec(A.matvec(v)) + lam * penalty_gram(v),
        dtype  = float,
    )
    x, info = cg(normal, b, x0=x0, rtol=tol, atol=0.0, maxiter=max_iter)
    if info != 0:
        logger.warning(f"penalized CG stopped without reaching tol={tol} (info={info})")
    return x, info == 0
