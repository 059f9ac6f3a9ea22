"""
msjstab.oracle

Brute-force steady-state solvers for row-stochastic matrices. Used to check
the product-form distribution, never by it.
"""

from __future__ import annotations

import logging

import numpy as np
import scipy.linalg
from scipy.sparse.csgraph import connected_components

from .errors import ReducibleChainError

log = logging.getLogger(__name__)


def _solve_dense(P: np.ndarray) -> np.ndarray:
    """Solve pi (P - I) = 0 with the last balance equation replaced by sum(pi) = 1."""
    N = P.shape[0]
    A = P.T - np.eye(N)
    A[-1, :] = 1.0
    rhs = np.zeros(N)
    rhs[-1] = 1.0
    return scipy.linalg.solve(A, rhs)


def closed_classes(P: np.ndarray, tol: float = 0.0) -> list[np.ndarray]:
    """Index arrays of the closed communicating classes of P."""
    graph = (P > tol).astype(np.int8)
    ncomp, labels = connected_components(graph, directed=True, connection="strong")
    out = []
    for c in range(ncomp):
        members = np.flatnonzero(labels == c)
        outside = np.setdiff1d(np.arange(P.shape[0]), members)
        if outside.size == 0 or not np.any(P[np.ix_(members, outside)] > tol):
            out.append(members)
    return out


def solve_stationary(P: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Stationary distribution of a row-stochastic matrix by dense linear solve.

    A chain with a single closed class and transient states (possible when one
    class never arrives) is solved on its closed class; the transient states
    get probability 0.
    """
    P = np.asarray(P, dtype=float)
    N = P.shape[0]
    if N == 1:
        return np.ones(1)

    pi = None
    try:
        pi = _solve_dense(P)
    except np.linalg.LinAlgError:
        log.debug("dense solve failed, falling back to closed-class solve")
    if pi is not None and np.all(np.isfinite(pi)) and np.min(pi) > -tol:
        residual = np.max(np.abs(pi @ P - pi))
        if residual < max(tol, 1e-10):
            pi = np.clip(pi, 0.0, None)
            return pi / pi.sum()

    classes = closed_classes(P)
    if len(classes) != 1:
        raise ReducibleChainError(
            f"chain has {len(classes)} closed classes; stationary distribution is not unique")
    members = classes[0]
    log.debug("solving on closed class of %d/%d states", members.size, N)
    sub = P[np.ix_(members, members)]
    pi = np.zeros(N)
    pi[members] = solve_stationary(sub, tol) if members.size > 1 else 1.0
    return pi


def solve_gth(P: np.ndarray) -> np.ndarray:
    """Grassmann-Taksar-Heyman state reduction; irreducible chains only."""
    T = np.array(P, dtype=float).T  # column-stochastic
    N = T.shape[0]
    for n in range(N - 1, 0, -1):
        Sn = T[:n, n].sum()
        if Sn <= 0.0:
            raise ReducibleChainError(f"GTH elimination hit an isolated state at {n}")
        T[n, :n] /= Sn
        T[:n, :n] += np.outer(T[:n, n], T[n, :n])
    pi = np.zeros(N)
    pi[0] = 1.0
    for n in range(1, N):
        pi[n] = T[n, 0] + pi[1:n] @ T[n, 1:n]
    return pi / pi.sum()


def power_iteration(P: np.ndarray, tol: float = 1e-12, max_iter: int = 1_000_000) -> np.ndarray:
    N = P.shape[0]
    pi = np.full(N, 1.0 / N)
    # lazy chain avoids oscillation on periodic matrices
    L = 0.5 * (P + np.eye(N))
    for _ in range(max_iter):
        nxt = pi @ L
        if np.max(np.abs(nxt - pi)) < tol:
            return nxt / nxt.sum()
        pi = nxt
    log.warning("power iteration did not reach tol=%g in %d steps", tol, max_iter)
    return pi / pi.sum()
