"""Smallest eigenpairs of sparse symmetric pencils ``K v = lam M v``."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = ["SingularFactorization", "EigenSolverError", "EigenInfo", "smallest_eigenpairs", "DENSE_LIMIT"]

log = logging.getLogger(__name__)

DENSE_LIMIT = 150


class SingularFactorization(RuntimeError):
    """The shifted stiffness matrix could not be factorized."""


class EigenSolverError(RuntimeError):
    """Iteration did not reach the requested residual."""


@dataclass
class EigenInfo:
    iterations: int
    residuals: list = field(default_factory=list)
    method: str = "subspace"
    shift: float = 0.0


def _relative_residuals(K, M, vals, vecs):
    Kv = K @ vecs
    Mv = M @ vecs
    r = Kv - Mv * vals[None, :]
    denom = np.linalg.norm(Mv, axis=0) * np.maximum(1.0, np.abs(vals))
    return np.linalg.norm(r, axis=0) / denom


def _m_normalize(M, vecs):
    nrm = np.sqrt(np.einsum("ij,ij->j", vecs, M @ vecs))
    return vecs / nrm[None, :]


def smallest_eigenpairs(K, M, k: int, shift: float = 0.0, tol: float = 1e-10, maxiter: int = 1000,
                        seed: int = 0, n_guard: int | None = None):
    """Return ``(vals, vecs, info)`` for the ``k`` smallest eigenpairs.

    Block inverse iteration with the factorization of ``K - shift*M``: each
    sweep applies the inverse to the whole block, orthonormalizes it and
    performs a Rayleigh-Ritz step on the unshifted pencil.  Extra guard
    vectors beyond ``k`` speed up convergence.  Eigenvectors are
    M-orthonormal.  Small problems are solved densely.
    """
    K = sp.csc_matrix(K)
    M = sp.csc_matrix(M)
    n = K.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must lie in [1, {n}]")
    if n <= DENSE_LIMIT:
        vals, vecs = sla.eigh(K.toarray(), M.toarray())
        vals, vecs = vals[:k], vecs[:, :k]
        res = _relative_residuals(K, M, vals, vecs)
        return vals, vecs, EigenInfo(0, res.tolist(), "dense", shift)

    A = (K - shift * M).tocsc() if shift else K
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise SingularFactorization(str(exc)) from exc
    diag_u = np.abs(lu.U.diagonal())
    if not np.all(np.isfinite(diag_u)) or diag_u.min() <= 1e-14 * diag_u.max():
        raise SingularFactorization("stiffness matrix is numerically singular")

    p = min(n, k + (max(k, 6) if n_guard is None else n_guard))
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    vals = np.zeros(k)
    res = np.full(k, np.inf)
    for it in range(1, maxiter + 1):
        Y = lu.solve(M @ X)
        Y, _ = np.linalg.qr(Y)
        Kh = Y.T @ (K @ Y)
        Mh = Y.T @ (M @ Y)
        Kh = 0.5 * (Kh + Kh.T)
        Mh = 0.5 * (Mh + Mh.T)
        theta, C = sla.eigh(Kh, Mh)
        X = Y @ C
        vals = theta[:k]
        res = _relative_residuals(K, M, vals, X[:, :k])
        if np.all(res <= tol):
            vecs = _m_normalize(M, X[:, :k])
            log.debug("subspace iteration converged in %d sweeps", it)
            return vals, vecs, EigenInfo(it, res.tolist(), "subspace", shift)
    raise EigenSolverError(f"no convergence after {maxiter} sweeps (max residual {res.max():.3e})")
