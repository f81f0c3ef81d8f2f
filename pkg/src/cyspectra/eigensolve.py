"""Lowest eigenpairs of symmetric pencils ``K u = lam M u``.

Two paths share one contract.  Small pencils go through LAPACK's
Cholesky-reduced symmetric solver; pencils above ``DENSE_LIMIT`` unknowns use
shift-invert Lanczos about zero with a fixed start vector.  Either result is
finished with a Rayleigh-Ritz pass so the returned vectors are M-orthonormal to
working precision.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

DENSE_LIMIT = 5000
RESIDUAL_GATE = 1e-8


class EigensolveError(RuntimeError):
    def __init__(self, message: str, best_residual: float = float("nan")):
        super().__init__(message)
        self.best_residual = best_residual


@dataclass
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.eigenvalues)

    @property
    def reliable_max(self) -> float:
        """Upper end of the range in which :func:`counting_function` may be used."""
        return float(self.eigenvalues[-1])


def _dense(K, M, count):
    Kd = K.toarray() if sp.issparse(K) else np.asarray(K, float)
    Md = M.toarray() if sp.issparse(M) else np.asarray(M, float)
    try:
        return la.eigh(Kd, Md, subset_by_index=[0, count - 1], driver="gvx")
    except la.LinAlgError as exc:
        raise EigensolveError(f"mass matrix is not positive definite: {exc}") from exc


def _start_vector(size):
    # deterministic, nonzero in every entry
    i = np.arange(1, size + 1, dtype=float)
    return 1.0 + 0.5 * np.sin(0.7 * i) + 0.25 * np.cos(1.3 * i)


def _iterative(K, M, count, maxiter):
    K = sp.csc_matrix(K)
    M = sp.csc_matrix(M)
    if np.any(M.diagonal() <= 0):
        raise EigensolveError("mass matrix is not positive definite")
    try:
        return spla.eigsh(K, k=count, M=M, sigma=0.0, which="LM", v0=_start_vector(K.shape[0]),
                          tol=1e-13, maxiter=maxiter)
    except spla.ArpackNoConvergence as exc:
        best = np.nan
        if len(exc.eigenvalues):
            r = [_residual(K, M, exc.eigenvalues[j], exc.eigenvectors[:, j])
                 for j in range(len(exc.eigenvalues))]
            best = float(np.min(r))
        raise EigensolveError(f"shift-invert Lanczos did not converge after {maxiter} iterations",
                              best) from exc


def _residual(K, M, lam, u):
    Mu = M @ u
    return float(np.linalg.norm(K @ u - lam * Mu) / (max(abs(lam), 1.0) * np.linalg.norm(Mu)))


def solve_generalized(K, M, count: int, method: str = "auto", maxiter: int = 20000) -> Spectrum:
    """Lowest ``count`` eigenpairs, ascending, with M-orthonormal vectors.

    ``method`` is ``'dense'``, ``'iterative'`` or ``'auto'`` (dense up to
    ``DENSE_LIMIT`` unknowns).  Residuals are ``|K u - lam M u| / (max(lam, 1) |M u|)``.
    """
    if count < 1:
        raise EigensolveError("count must be at least 1")
    size = K.shape[0]
    if count > size:
        raise EigensolveError(f"requested {count} eigenpairs of a {size}-dof pencil")
    if method == "auto":
        method = "dense" if size <= DENSE_LIMIT else "iterative"
    if method == "iterative" and count >= size - 1:
        method = "dense"
    if method == "dense":
        vals, vecs = _dense(K, M, count)
    elif method == "iterative":
        vals, vecs = _iterative(K, M, count, maxiter)
    else:
        raise ValueError(f"unknown method '{method}'")

    # Rayleigh-Ritz on the returned subspace: sorts, M-orthonormalises and
    # splits any degenerate clusters consistently
    Ks = vecs.T @ (K @ vecs)
    Ms = vecs.T @ (M @ vecs)
    vals, coef = la.eigh(0.5 * (Ks + Ks.T), 0.5 * (Ms + Ms.T))
    vecs = vecs @ coef
    res = np.array([_residual(K, M, vals[j], vecs[:, j]) for j in range(count)])
    if np.any(res > RESIDUAL_GATE):
        raise EigensolveError(f"residual gate failed: worst {res.max():.3e}", float(res.min()))
    return Spectrum(vals, vecs, res, {"method": method, "dof": size})


class RangeError(ValueError):
    pass


def counting_function(spec: Spectrum, lam: float) -> int:
    """Number of computed eigenvalues strictly below ``lam``.

    Only valid below the largest computed eigenvalue; beyond it the count
    would be a guess, so this raises instead.
    """
    if lam > spec.reliable_max:
        raise RangeError(f"lambda={lam} exceeds the computed range (max {spec.reliable_max})")
    return int(np.searchsorted(spec.eigenvalues, lam, side="left"))


def inertia_count(K, M, sigma: float) -> int:
    """Eigenvalues of the pencil below ``sigma``, from the LDL^T inertia of ``K - sigma M``."""
    A = (K.toarray() if sp.issparse(K) else np.asarray(K)) - sigma * (
        M.toarray() if sp.issparse(M) else np.asarray(M))
    _, D, _ = la.ldl(A)
    return int(np.count_nonzero(np.linalg.eigvalsh(D) < 0))
