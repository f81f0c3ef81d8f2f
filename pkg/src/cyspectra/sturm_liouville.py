"""Finite-difference Dirichlet eigensolver for 1-D Sturm-Liouville problems.

The problem ``-(p h')' + q h = lam w h`` is discretised with the conservative
three-point scheme (``p`` sampled at cell faces).  The diagonal weight is
absorbed by a symmetric scaling, so each solve is a symmetric tridiagonal
eigenproblem handled by Sturm-sequence bisection (LAPACK ``stebz``) with
inverse iteration for the vectors.

Problems whose coefficients carry a common, possibly huge, factor
``exp(sigma(x))`` (the radial ball problem) pass ``sigma`` as ``log_scale``; the
scaled matrix only involves differences of ``sigma``, which is the discrete form
of the Liouville normal-form transformation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal

from .domains import DomainSpec, Wedge

Coef = Callable[[np.ndarray], np.ndarray]


class SLError(RuntimeError):
    pass


class GridTooCoarse(SLError):
    pass


def _as_fn(c) -> Coef:
    if callable(c):
        return lambda x: np.asarray(c(x), float) * np.ones_like(x)
    return lambda x: np.full_like(x, float(c))


@dataclass(frozen=True)
class SLProblem:
    """``-(p h')' + q h = lam w h`` on ``(a, b)``.

    ``left='regular'`` replaces the left Dirichlet condition by boundedness at a
    singular endpoint where the scaled ``p`` vanishes; the grid is then
    cell-centred (first node at ``a + h/2``).
    """

    p: Coef
    q: Coef
    w: Coef
    interval: tuple
    left: str = "dirichlet"
    log_scale: Optional[Coef] = None
    label: str = ""

    def __post_init__(self):
        for name in ("p", "q", "w"):
            object.__setattr__(self, name, _as_fn(getattr(self, name)))
        a, b = self.interval
        if not a < b:
            raise SLError(f"empty interval ({a}, {b})")
        if self.left not in ("dirichlet", "regular"):
            raise SLError(f"unknown left boundary '{self.left}'")


@dataclass
class Discretization:
    x: np.ndarray
    dx: float
    diag: np.ndarray
    off: np.ndarray
    w: np.ndarray
    sigma: np.ndarray

    def physical(self):
        """Stiffness and mass matrices of the unscaled pencil (including ``dx``)."""
        s = np.sqrt(self.w * np.exp(self.sigma))
        K = sp.diags([self.off * s[:-1] * s[1:], self.diag * s**2, self.off * s[:-1] * s[1:]],
                     [-1, 0, 1]) * self.dx
        M = sp.diags(self.w * np.exp(self.sigma) * self.dx)
        return K.tocsr(), M.tocsr()


def discretize(prob: SLProblem, grid: int) -> Discretization:
    a, b = prob.interval
    h = (b - a) / grid
    if prob.left == "dirichlet":
        x = a + h * np.arange(1, grid)
        faces = a + h * (np.arange(grid) + 0.5)
    else:
        x = a + h * (np.arange(grid) + 0.5)
        faces = a + h * np.arange(1, grid + 1)  # interior faces plus the right wall
    sig = prob.log_scale
    sx = sig(x) if sig else np.zeros_like(x)
    sf = sig(faces) if sig else np.zeros_like(faces)
    px, pf = prob.p(x), prob.p(faces)
    wx, qx = prob.w(x), prob.q(x)
    if np.any(~(pf > 0)) or np.any(~(px > 0)):
        raise SLError("p must be positive on the grid")
    if np.any(~(wx > 0)):
        raise SLError("weight must be positive on the grid")

    if prob.left == "dirichlet":
        left_flux = pf[:-1] * np.exp(sf[:-1] - sx)
        right_flux = pf[1:] * np.exp(sf[1:] - sx)
        inner = pf[1:-1] * np.exp(sf[1:-1] - 0.5 * (sx[:-1] + sx[1:]))
    else:
        left_flux = np.concatenate([[0.0], pf[:-1] * np.exp(sf[:-1] - sx[1:])])
        right_flux = pf * np.exp(sf - sx)
        # wall sits half a cell from the last node
        right_flux[-1] *= 2.0
        inner = pf[:-1] * np.exp(sf[:-1] - 0.5 * (sx[:-1] + sx[1:]))
    wf = np.sqrt(wx)
    diag = (left_flux + right_flux) / (h**2 * wx) + qx / wx
    off = -inner / (h**2 * wf[:-1] * wf[1:])
    return Discretization(x, h, diag, off, wx, sx)


@dataclass
class SLSolution:
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray  # columns, normalised so that sum(w h^2) dx = 1
    x: np.ndarray
    grid_size: int
    refinement_estimate: np.ndarray
    extrapolated: np.ndarray
    meta: dict = field(default_factory=dict)
    # unit vectors of the symmetric scaled problem; same signs as eigenfunctions, never overflow
    scaled: Optional[np.ndarray] = None

    def sign_changes(self, k: int) -> int:
        """Number of interior sign changes of the ``k``-th eigenfunction (1-based)."""
        h = (self.scaled if self.scaled is not None else self.eigenfunctions)[:, k - 1]
        h = h[np.abs(h) > 1e-12 * np.abs(h).max()]
        return int(np.count_nonzero(np.diff(np.sign(h))))


def _solve(disc: Discretization, count: int):
    try:
        vals, vecs = eigh_tridiagonal(disc.diag, disc.off, select="i",
                                      select_range=(0, count - 1), lapack_driver="stebz")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SLError(f"tridiagonal eigensolver failed: {exc}") from exc
    # combine in log space; for huge log_scale ranges the physical function can
    # exceed the float range near the axis and is then reported as inf
    log_scale = -0.5 * disc.sigma - 0.5 * np.log(disc.w * disc.dx)
    with np.errstate(divide="ignore", over="ignore"):
        log_mag = np.log(np.abs(vecs)) + log_scale[:, None]
        funcs = np.sign(vecs) * np.exp(log_mag)
    # fix the sign so each function starts positive
    first = vecs[np.argmax(np.abs(vecs) > 1e-12 * np.abs(vecs).max(axis=0), axis=0), np.arange(count)]
    flip = np.where(first < 0, -1.0, 1.0)
    return vals, funcs * flip, vecs * flip


def sl_eigs(prob: SLProblem, count: int, grid: int, refine: bool = True) -> SLSolution:
    """Lowest ``count`` eigenpairs on a grid of ``grid`` cells.

    With ``refine`` the problem is also solved on ``grid // 2`` cells; the
    Richardson estimate ``|lam_h - lam_2h| / 3`` and extrapolated values are
    attached.
    """
    if count < 1:
        raise SLError("count must be at least 1")
    if grid < 8 * count:
        raise SLError(f"grid {grid} too small for {count} eigenvalues (need >= {8 * count})")
    disc = discretize(prob, grid)
    vals, funcs, vecs = _solve(disc, count)
    if refine:
        coarse = _solve(discretize(prob, grid // 2), count)[0]
        diff = vals - coarse
        est = np.abs(diff) / 3.0
        extra = vals + diff / 3.0
    else:
        est = np.full(count, np.nan)
        extra = vals.copy()
    return SLSolution(vals, funcs, disc.x, grid, est, extra,
                      {"problem": prob.label, "left": prob.left}, vecs)


# ------------------------------------------------------------- builders

def theta_problem(domain: DomainSpec, mu: float) -> SLProblem:
    """Angular problem ``-(phi h')' + mu phi h = lam csc^2(theta) h`` on the wedge."""
    w = domain.variant
    if not isinstance(w, Wedge):
        raise SLError("theta_problem needs a wedge domain")
    phi = domain.tensor.phi
    p = lambda t: phi(np.ones_like(t), t)
    return SLProblem(p, lambda t: mu * p(t), lambda t: 1.0 / np.sin(t) ** 2,
                     (w.theta0, w.theta1), label=f"theta(mu={mu:g})")


def radial_mode(ell: float, k: int):
    """Dirichlet mode ``sin(k ell t)`` on ``(0, pi/ell)`` and its separation constant."""
    if k == 0:
        raise SLError("k = 0 is the trivial mode")
    if not ell > 0:
        raise SLError("ell must be positive")
    mu = (k * ell) ** 2
    return mu, lambda t: np.sin(k * ell * np.asarray(t, float))


def _log_sinh(x):
    x = np.asarray(x, float)
    big = x > 20
    out = np.empty_like(x)
    out[big] = x[big] - math.log(2.0) + np.log1p(-np.exp(-2 * x[big]))
    out[~big] = np.log(np.sinh(x[~big]))
    return out


def _csch2(x):
    x = np.asarray(x, float)
    e = np.exp(-2 * x)
    return 4 * e / (-np.expm1(-2 * x)) ** 2


def ball_problem(n: int, kappa: float, a: float, m: int = 0) -> SLProblem:
    """Radial problem on the geodesic ball of radius ``a`` in curvature ``-kappa^2``.

    Angular mode ``m`` of the sphere factor contributes ``m(m+n-2)/sn^2``.
    The radial weight ``sn^(n-1)`` is carried as ``log_scale``, normalised to
    vanish at ``r = a``, so ``sinh^(n-1)`` is never formed.  ``kappa = 0``
    gives the Euclidean ball.
    """
    if n < 2 or a <= 0 or m < 0 or kappa < 0:
        raise SLError("ball_problem needs n >= 2, a > 0, m >= 0, kappa >= 0")
    ang = m * (m + n - 2)
    if kappa > 0:
        ref = float(_log_sinh(kappa * a))
        log_scale = lambda r: (n - 1) * (_log_sinh(kappa * r) - ref)
        q = lambda r: ang * kappa**2 * _csch2(kappa * r)
    else:
        log_scale = lambda r: (n - 1) * np.log(r / a)
        q = lambda r: ang / r**2
    one = lambda r: np.ones_like(r)
    return SLProblem(one, q, one, (0.0, a), left="regular", log_scale=log_scale,
                     label=f"ball(n={n},kappa={kappa:g},a={a:g},m={m})")


def liouville_potential(n: int, kappa: float, m: int, r):
    """Potential ``V`` of the normal form ``-u'' + V u = lam u`` of the ball problem."""
    r = np.asarray(r, float)
    if kappa == 0:
        return ((n - 1) * (n - 3) / 4 + m * (m + n - 2)) / r**2
    s2 = np.sinh(kappa * r) ** 2
    return ((n - 1) ** 2 * kappa**2 / 4 + (n - 1) * (n - 3) * kappa**2 / (4 * s2)
            + m * (m + n - 2) * kappa**2 / s2)


# ------------------------------------------------------------- gap

@dataclass
class GapResult:
    lambda1: float
    lambda2: float
    branch: str
    tie: bool
    candidates: dict
    estimates: dict
    s_values: np.ndarray
    l2_norms: np.ndarray  # int h_s^2 with int csc^2 h_s^2 = 1
    grid: int

    @property
    def gap(self) -> float:
        return self.lambda2 - self.lambda1


def gap_wedge(domain: DomainSpec, grid: int = 4096, s_samples: int = 5) -> GapResult:
    """First two eigenvalues of the separated wedge problem.

    ``lambda2`` is the smaller of the first eigenvalue at ``mu = 4 ell^2`` and
    the second at ``mu = ell^2``.  When the two candidates agree within their
    refinement estimates the grid cannot decide the branch; this raises
    :class:`GridTooCoarse` unless they agree to roundoff (a genuine tie, which
    reports the ``4 ell^2`` branch with ``tie=True``).
    """
    w = domain.variant
    if not isinstance(w, Wedge):
        raise SLError("gap_wedge needs a wedge domain")
    ell2 = w.ell**2
    one = sl_eigs(theta_problem(domain, ell2), 2, grid)
    four = sl_eigs(theta_problem(domain, 4 * ell2), 1, grid)
    c4, c1 = float(four.eigenvalues[0]), float(one.eigenvalues[1])
    e4, e1 = float(four.refinement_estimate[0]), float(one.refinement_estimate[1])
    tie = False
    if abs(c4 - c1) <= e4 + e1:
        if abs(c4 - c1) > 1e-10 * max(abs(c4), abs(c1)):
            raise GridTooCoarse(
                f"branches {c4:.12g} (mu=4ell^2) and {c1:.12g} (mu=ell^2) overlap within "
                f"refinement estimates at grid {grid}; refine the grid")
        tie = True
    branch = "mu=4ell^2" if (c4 <= c1 or tie) else "mu=ell^2"
    lam2 = c4 if branch == "mu=4ell^2" else c1

    s_values = np.linspace(0.0, 1.0, s_samples)
    norms = []
    for s in s_values:
        sol = sl_eigs(theta_problem(domain, ell2 * (1 + 3 * s)), 1, grid, refine=False)
        h = sol.eigenfunctions[:, 0]
        norms.append(float(np.sum(h**2) * (w.theta1 - w.theta0) / grid))
    return GapResult(
        lambda1=float(one.eigenvalues[0]), lambda2=lam2, branch=branch, tie=tie,
        candidates={"mu=4ell^2": c4, "mu=ell^2": c1},
        estimates={"lambda1": float(one.refinement_estimate[0]), "mu=4ell^2": e4, "mu=ell^2": e1},
        s_values=s_values, l2_norms=np.array(norms), grid=grid,
    )
