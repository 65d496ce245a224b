# operators.py
import logging
from enum import Enum

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from config import RANK_TOL
from errors import InvalidArgumentError, InvalidDimensionError
from linalg_core import numerical_rank

logger = logging.getLogger(__name__)


class OperatorKind(str, Enum):
    DENSE    = "dense"
    DIF1D    = "dif-1d"
    DIF2D    = "dif-2d"
    FUSED    = "fused-lasso"
    IDENTITY = "identity"
    UNITARY  = "unitary"


# ── Cosupport ───────────────────────────────────────────
class Cosupport:
    """Sorted set of analysis-row indices, all below p."""

    __slots__ = ("indices", "p")

    def __init__(self, indices, p):
        idx = np.unique(np.asarray(indices, dtype=np.int64).ravel())
        if idx.size and (idx[0] < 0 or idx[-1] >= p):
            raise InvalidArgumentError(f"cosupport indices must lie in [0, {p})")
        self.indices = idx
        self.p       = int(p)

    @classmethod
    def full(cls, p):
        return cls(np.arange(p), p)

    @classmethod
    def from_mask(cls, mask):
        mask = np.asarray(mask, dtype=bool)
        return cls(np.flatnonzero(mask), mask.size)

    def mask(self):
        out = np.zeros(self.p, dtype=bool)
        out[self.indices] = True
        return out

    def complement(self):
        return Cosupport.from_mask(~self.mask())

    def intersect(self, other):
        return Cosupport(np.intersect1d(self.indices, other.indices), self.p)

    def to_list(self):
        return self.indices.tolist()

    def __len__(self):
        return int(self.indices.size)

    def __iter__(self):
        return iter(self.indices.tolist())

    def __contains__(self, i):
        return bool(np.any(self.indices == i))

    def __eq__(self, other):
        if not isinstance(other, Cosupport):
            return NotImplemented
        return self.p == other.p and np.array_equal(self.indices, other.indices)

    def __repr__(self):
        return f"Cosupport(size={len(self)}, p={self.p})"


# ── Analysis operator ───────────────────────────────────
class AnalysisOperator:
    """The p x d analysis operator Omega.

    Difference-type kinds (dif-1d, dif-2d, fused-lasso) keep the graph of
    their difference rows: row r reads x[heads[r]] - x[tails[r]]. Fused-lasso
    appends d identity rows after the n_diff difference rows.
    """

    def __init__(self, kind, p, d, matrix=None, sparse=None, tails=None, heads=None, shape=None):
        self.kind   = OperatorKind(kind)
        self.p      = int(p)
        self.d      = int(d)
        self.matrix = matrix
        self.sparse = sparse
        self.tails  = tails
        self.heads  = heads
        self.shape2d = shape
        self.n_diff = 0 if tails is None else int(tails.size)

    @property
    def shape(self):
        return (self.p, self.d)

    @property
    def is_difference(self):
        return self.kind in (OperatorKind.DIF1D, OperatorKind.DIF2D, OperatorKind.FUSED)

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == OperatorKind.IDENTITY:
            return x.copy()
        if self.matrix is not None:
            return self.matrix @ x
        return self.sparse @ x

    def adjoint(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == OperatorKind.IDENTITY:
            return u.copy()
        if self.matrix is not None:
            return self.matrix.T @ u
        return self.sparse.T @ u

    def to_dense(self):
        if self.kind == OperatorKind.IDENTITY:
            return np.eye(self.d)
        if self.matrix is not None:
            return np.array(self.matrix, dtype=float)
        return self.sparse.toarray()

    def rows(self, cosupport):
        idx = cosupport.indices if isinstance(cosupport, Cosupport) else np.asarray(cosupport, dtype=int)
        if self.kind == OperatorKind.IDENTITY:
            return np.eye(self.d)[idx]
        if self.matrix is not None:
            return np.asarray(self.matrix[idx], dtype=float)
        return self.sparse[idx].toarray()

    def as_linear_operator(self):
        return LinearOperator(
            shape   = self.shape,
            matvec  = self.apply,
            rmatvec = self.adjoint,
            dtype   = float,
        )

    def __repr__(self):
        return f"AnalysisOperator(kind={self.kind.value}, p={self.p}, d={self.d})"


def _difference_matrix(tails, heads, d, extra_identity=False):
    n = tails.size
    r = np.arange(n)
    data = np.concatenate([-np.ones(n), np.ones(n)])
    rows = np.concatenate([r, r])
    cols = np.concatenate([tails, heads])
    D = sp.csr_matrix((data, (rows, cols)), shape=(n, d))
    if extra_identity:
        D = sp.vstack([D, sp.identity(d, format="csr")], format="csr")
    return D


# ── Constructors ────────────────────────────────────────
def make_1d_dif(d):
    if d < 2:
        raise InvalidDimensionError(f"1D difference operator needs d >= 2, got {d}")
    tails = np.arange(d - 1)
    heads = tails + 1
    return AnalysisOperator(
        OperatorKind.DIF1D, d - 1, d,
        sparse = _difference_matrix(tails, heads, d),
        tails  = tails,
        heads  = heads,
    )


def make_fused_lasso(d):
    if d < 2:
        raise InvalidDimensionError(f"fused-lasso operator needs d >= 2, got {d}")
    tails = np.arange(d - 1)
    heads = tails + 1
    return AnalysisOperator(
        OperatorKind.FUSED, 2 * d - 1, d,
        sparse = _difference_matrix(tails, heads, d, extra_identity=True),
        tails  = tails,
        heads  = heads,
    )


def make_2d_dif(h, w):
    """Horizontal differences in raster order, then vertical ones."""
    if h < 2 or w < 2:
        raise InvalidDimensionError(f"2D difference operator needs h, w >= 2, got {h}x{w}")
    grid = np.arange(h * w).reshape(h, w)
    h_tails, h_heads = grid[:, :-1].ravel(), grid[:, 1:].ravel()
    v_tails, v_heads = grid[:-1, :].ravel(), grid[1:, :].ravel()
    tails = np.concatenate([h_tails, v_tails])
    heads = np.concatenate([h_heads, v_heads])
    return AnalysisOperator(
        OperatorKind.DIF2D, tails.size, h * w,
        sparse = _difference_matrix(tails, heads, h * w),
        tails  = tails,
        heads  = heads,
        shape  = (h, w),
    )


def make_identity(d):
    if d < 1:
        raise InvalidDimensionError("identity operator needs d >= 1")
    return AnalysisOperator(OperatorKind.IDENTITY, d, d)


def make_dense(matrix):
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2:
        raise InvalidDimensionError("dense operator must be a 2-D array")
    if not np.all(np.isfinite(matrix)):
        raise InvalidArgumentError("dense operator has non-finite entries")
    return AnalysisOperator(OperatorKind.DENSE, matrix.shape[0], matrix.shape[1], matrix=matrix)


def make_unitary(matrix, tol=1e-8):
    matrix = np.asarray(matrix, dtype=float)
    n = matrix.shape[0]
    if matrix.shape != (n, n) or np.linalg.norm(matrix.T @ matrix - np.eye(n)) > tol:
        raise InvalidArgumentError("unitary operator must be square with orthonormal rows")
    return AnalysisOperator(OperatorKind.UNITARY, n, n, matrix=matrix)


def make_random_tight_frame(p, d, seed):
    """Polar factor of a seeded p x d Gaussian draw, so Omega^T Omega = I."""
    if p < d:
        raise InvalidDimensionError(f"tight frame needs p >= d, got p={p}, d={d}")
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((p, d))
    U, _, Vt = np.linalg.svd(G, full_matrices=False)
    frame = U @ Vt
    logger.debug(f"Random tight frame {p}x{d} from seed {seed}")
    if p == d:
        return AnalysisOperator(OperatorKind.UNITARY, p, d, matrix=frame)
    return AnalysisOperator(OperatorKind.DENSE, p, d, matrix=frame)


# ── Cosupport bookkeeping ───────────────────────────────
def _zero_tol(coeffs, zero_tol):
    if zero_tol is not None:
        if zero_tol < 0:
            raise InvalidArgumentError("zero_tol must be non-negative")
        return zero_tol
    return 1e-9 * float(np.max(np.abs(coeffs))) if coeffs.size else 0.0


def cosupport_of(Omega, v, zero_tol=None):
    """Rows with |(Omega v)_i| <= zero_tol (default 1e-9 * ||Omega v||_inf)."""
    coeffs = Omega.apply(v)
    tol = _zero_tol(coeffs, zero_tol)
    return Cosupport(np.flatnonzero(np.abs(coeffs) <= tol), Omega.p)


def cosparsity(Omega, x, zero_tol=None):
    coeffs = Omega.apply(x)
    tol = _zero_tol(coeffs, zero_tol)
    return int(Omega.p - np.count_nonzero(np.abs(coeffs) > tol))


def select_smallest(values, l):
    """Indices of the l smallest |values|, lowest index first on ties.

    If more than l entries are exactly zero, all of them are returned.
    """
    a = np.abs(np.asarray(values, dtype=float))
    n = a.size
    if l < 0 or l > n:
        raise InvalidArgumentError(f"cannot select {l} of {n} coefficients")
    zeros = np.flatnonzero(a == 0.0)
    if zeros.size > l:
        return zeros
    order = np.argsort(a, kind="stable")
    return np.sort(order[:l])


def smallest_coefficients_cosupport(Omega, z, l):
    if l < 0 or l > Omega.p:
        raise InvalidArgumentError(f"cosparsity l={l} outside [0, {Omega.p}]")
    return Cosupport(select_smallest(Omega.apply(z), l), Omega.p)


def corank(Omega, cosupport, rank_tol=RANK_TOL):
    if len(cosupport) == 0:
        return 0
    return numerical_rank(Omega.rows(cosupport), rank_tol)
