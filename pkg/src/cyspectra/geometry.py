"""Model-space comparison functions and the closed-form constants built on them.

Curvatures are passed as magnitudes: ``kappa1``/``kappa2`` describe the pinching
``-kappa1**2 <= K <= -kappa2**2``.  The only place a signed curvature appears is
:func:`sn` and :func:`hessian_ratio`, which follow the ODE convention
``x'' + kappa * x = 0`` (so hyperbolic space of curvature ``-k**2`` is ``kappa=-k**2``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """An argument lies outside the domain of a geometric function."""


@dataclass(frozen=True)
class CurvaturePinch:
    kappa1: float
    kappa2: float

    def __post_init__(self):
        if not (0.0 <= self.kappa2 <= self.kappa1):
            raise DomainError(
                f"pinch requires 0 <= kappa2 <= kappa1, got kappa1={self.kappa1}, kappa2={self.kappa2}"
            )


@dataclass(frozen=True)
class ComparisonValue:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise DomainError(f"empty comparison interval [{self.lo}, {self.hi}]")

    def __contains__(self, value: float) -> bool:
        return self.lo <= value <= self.hi


def _check_radius(r):
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0)):
        raise DomainError("radius must be positive")
    return r


def sn(kappa: float, r):
    """Solution of ``x'' + kappa x = 0`` with ``x(0) = 0``, ``x'(0) = 1``."""
    r = _check_radius(r)
    if kappa < 0:
        k = math.sqrt(-kappa)
        out = np.sinh(k * r) / k
    elif kappa == 0:
        out = r.copy()
    else:
        k = math.sqrt(kappa)
        out = np.sin(k * r) / k
    return out if out.ndim else float(out)


def _coth(x):
    x = np.asarray(x, dtype=float)
    small = x < 1e-4
    out = np.empty_like(x)
    xs = x[small]
    # series keeps precision where 1/tanh cancels
    out[small] = 1.0 / xs + xs / 3.0 - xs**3 / 45.0
    out[~small] = 1.0 / np.tanh(x[~small])
    return out


def hessian_ratio(kappa: float, r):
    """``sn'(r)/sn(r)`` for ``kappa <= 0``: ``sqrt(-kappa) coth(sqrt(-kappa) r)`` or ``1/r``."""
    if kappa > 0:
        raise DomainError("hessian_ratio is only used for nonpositive curvature")
    r = _check_radius(r)
    if kappa == 0:
        out = 1.0 / r
    else:
        k = math.sqrt(-kappa)
        out = k * _coth(k * r)
    return out if np.ndim(out) else float(out)


def box_r_bounds(n: int, eps: float, delta: float, pinch: CurvaturePinch, r: float) -> ComparisonValue:
    """Two-sided bound on the Cheng-Yau operator applied to the distance function.

    ``(n-1) eps sn'/sn`` at curvature ``-kappa2**2`` from below and
    ``(n-1) delta sn'/sn`` at curvature ``-kappa1**2`` from above.
    """
    if n < 2:
        raise DomainError("dimension must be at least 2")
    if not (0 < eps <= delta):
        raise DomainError(f"need 0 < eps <= delta, got eps={eps}, delta={delta}")
    lo = (n - 1) * eps * hessian_ratio(-pinch.kappa2**2, r)
    hi = (n - 1) * delta * hessian_ratio(-pinch.kappa1**2, r)
    return ComparisonValue(float(lo), float(hi))


def a_const(n: int, eps: float, delta: float) -> float:
    """``-(n-1)^2 eps^2 + 2(n-1) delta^2``; its sign selects the branch of the pinched bound."""
    if n < 2:
        raise DomainError("dimension must be at least 2")
    if not (0 < eps <= delta):
        raise DomainError(f"need 0 < eps <= delta, got eps={eps}, delta={delta}")
    return -((n - 1) ** 2) * eps**2 + 2 * (n - 1) * delta**2


def hyperbolic_distance(p, q, kappa: float = 1.0):
    """Distance in the upper half-plane model of curvature ``-kappa**2``.

    Uses ``d = (2/kappa) asinh(|p - q| / (2 sqrt(y_p y_q)))``, which equals the
    usual ``acosh`` form but keeps full precision for nearby points.
    Accepts single points or broadcastable arrays of shape ``(..., 2)``.
    """
    if not kappa > 0:
        raise DomainError("kappa must be positive")
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any(p[..., 1] <= 0) or np.any(q[..., 1] <= 0):
        raise DomainError("half-plane points need a positive second coordinate")
    chord = np.hypot(p[..., 0] - q[..., 0], p[..., 1] - q[..., 1])
    d = 2.0 * np.arcsinh(chord / (2.0 * np.sqrt(p[..., 1] * q[..., 1]))) / kappa
    return d if np.ndim(d) else float(d)


def max_pairwise_distance(points, kappa: float = 1.0) -> float:
    """Largest hyperbolic distance among a set of half-plane points (diameter estimate)."""
    pts = np.asarray(points, dtype=float)
    best = 0.0
    # row blocks keep memory bounded for a few thousand boundary samples
    for start in range(0, len(pts), 512):
        block = pts[start:start + 512, None, :]
        best = max(best, float(np.max(hyperbolic_distance(block, pts[None, :, :], kappa))))
    return best
