# synthesis.py
"""Textbook IHT / HTP / CoSaMP / SP for D = I.

These are reference oracles: with Omega = I and l = d - k the analysis
pursuits must reproduce their iterates. They share the analysis solvers'
stopping rules and tie-breaking.
"""
import logging

import numpy as np

from errors import InvalidArgumentError
from linalg_core import as_operator
from models import SolverConfig, StopRule
from operators import Cosupport, select_smallest
from solvers import IterationLog, resolve_step

logger = logging.getLogger(__name__)

SYNTHESIS_VARIANTS = ("IHT", "HTP", "CoSaMP", "SP")


def largest_support(v, k):
    """Complement of the d - k smallest entries, so ties match the analysis side."""
    d = v.size
    mask = np.ones(d, dtype=bool)
    mask[select_smallest(v, d - k)] = False
    return np.flatnonzero(mask)


def _restricted_lstsq(M, y, support):
    x = np.zeros(M.shape[1])
    if support.size:
        x[support] = np.linalg.lstsq(M[:, support], y, rcond=None)[0]
    return x


def _keep(v, support):
    x = np.zeros_like(v)
    x[support] = v[support]
    return x


def reference_synthesis(variant, y, M, k, cfg=None, a=None):
    """Run IHT, HTP, CoSaMP (a=2) or SP (a=1) with sparsity k."""
    if variant not in SYNTHESIS_VARIANTS:
        raise InvalidArgumentError(f"Unsupported synthesis variant: {variant}")
    M = np.asarray(M, dtype=float)
    d = M.shape[1]
    if k < 0 or k > d:
        raise InvalidArgumentError(f"sparsity k={k} outside [0, {d}]")
    cfg = resolve_step(cfg or SolverConfig(), M)
    A = as_operator(M)
    y = np.asarray(y, dtype=float)
    log = IterationLog(cfg, y)

    x = np.zeros(d)
    support = np.array([], dtype=np.int64)
    log.record(x, np.linalg.norm(y))

    if variant in ("CoSaMP", "SP"):
        a = (2 if variant == "CoSaMP" else 1) if a is None else a
        k_delta = int(min(max(round(a * k), 0), d))

    converged = cfg.stop == StopRule.MAX_ONLY
    for t in range(1, cfg.max_iters + 1):
        residual = y - A.matvec(x)
        if variant in ("IHT", "HTP"):
            x_g = x + cfg.mu * A.rmatvec(residual)
            support = largest_support(x_g, k)
            x_new = _keep(x_g, support) if variant == "IHT" else _restricted_lstsq(M, y, support)
        else:
            proxy_support = largest_support(A.rmatvec(residual), k_delta)
            merged = np.union1d(support, proxy_support)
            w = _restricted_lstsq(M, y, merged)
            support = largest_support(w, k)
            x_new = _keep(w, support) if variant == "CoSaMP" else _restricted_lstsq(M, y, support)

        log.record(x_new, np.linalg.norm(y - A.matvec(x_new)))
        done = log.should_stop(x_new, x)
        x = x_new
        if done:
            converged = True
            break

    zeros = np.setdiff1d(np.arange(d), support)
    return log.result(variant, x, Cosupport(zeros, d), d - k, converged)
