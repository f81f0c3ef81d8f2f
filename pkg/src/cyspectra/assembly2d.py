"""Five-point finite-volume pencils for the weighted operator on 2-D charts.

In a chart with metric ``rho (du^2 + dv^2)`` the Dirichlet energy of
``-div(phi grad u) + phi <grad eta, grad u>`` in the measure ``exp(-eta) dvol``
is ``int phi exp(-eta) (u_u^2 + u_v^2) du dv``; ``rho`` only enters the mass
form ``int exp(-eta) rho u^2 du dv``.  The polar chart of the Euclidean disk is
not conformal and carries its own energy factors ``(r, 1/r)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import scipy.io
import scipy.sparse as sp

from .domains import (Disk, DomainSpec, DriftSpec, HalfPlaneRect, Rectangle, TensorSpec,
                      Wedge)
from .eigensolve import Spectrum, solve_generalized

ChartFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


class AssemblyError(ValueError):
    pass


def _ones(u, v):
    return np.ones(np.broadcast(u, v).shape)


@dataclass(frozen=True)
class ConformalChart:
    u_range: tuple
    v_range: tuple
    rho: ChartFn
    to_native: Callable
    chart_tag: str
    energy_u: ChartFn = _ones
    energy_v: ChartFn = _ones
    v_periodic: bool = False
    u_axis: bool = False  # left u-edge is a coordinate axis (no boundary condition)


def conformal_chart(domain: DomainSpec) -> ConformalChart:
    v = domain.variant
    if isinstance(v, Wedge):
        return ConformalChart((0.0, v.t_max), (v.theta0, v.theta1),
                              lambda t, th: 1.0 / np.sin(th) ** 2,
                              lambda t, th: (np.exp(t), th), "wedge")
    if isinstance(v, HalfPlaneRect):
        k2 = domain.model.kappa**2
        return ConformalChart((v.x0, v.x1), (v.y0, v.y1),
                              lambda x, y: 1.0 / (k2 * y**2) * np.ones_like(x),
                              lambda x, y: (x, y), "halfplane")
    if isinstance(v, Rectangle):
        return ConformalChart((0.0, v.width), (0.0, v.height), _ones,
                              lambda x, y: (x, y), "euclidean")
    if isinstance(v, Disk):
        return ConformalChart((0.0, v.radius), (0.0, 2 * math.pi),
                              lambda r, th: r * np.ones_like(th),
                              lambda r, th: (r, th), "polar",
                              energy_u=lambda r, th: r * np.ones_like(th),
                              energy_v=lambda r, th: 1.0 / r * np.ones_like(th),
                              v_periodic=True, u_axis=True)
    raise AssemblyError(f"no rectangular chart for a {domain.kind} domain")


@dataclass
class Pencil:
    K: sp.csr_matrix
    M: sp.csr_matrix
    grid: tuple  # interior nodes (nu, nv)
    dof_map: np.ndarray  # dof -> (i, j)
    nodes: tuple  # 1-D node coordinates (u, v)
    chart_tag: str = ""

    @property
    def dof(self) -> int:
        return self.K.shape[0]

    def export_matrix_market(self, prefix) -> tuple:
        prefix = Path(prefix)
        kp, mp = prefix.with_name(prefix.name + "_K.mtx"), prefix.with_name(prefix.name + "_M.mtx")
        scipy.io.mmwrite(str(kp), self.K, symmetry="symmetric")
        scipy.io.mmwrite(str(mp), self.M, symmetry="symmetric")
        return kp, mp


def _axis(lo, hi, cells, *, periodic=False, axis=False):
    """Nodes, spacing and distance from the last node to the far wall."""
    h = (hi - lo) / cells
    if periodic:
        return lo + h * np.arange(cells), h, None
    if axis:
        return lo + h * (np.arange(cells) + 0.5), h, 0.5 * h
    return lo + h * np.arange(1, cells), h, h


def assemble(chart: ConformalChart, tensor: TensorSpec, drift: DriftSpec, grid) -> Pencil:
    """Stiffness and lumped mass on a ``grid = (cells_u, cells_v)`` mesh.

    Face coefficients are geometric means of ``phi exp(-eta)`` at the two
    adjacent nodes (the boundary value stands in for the missing node on
    Dirichlet faces).
    """
    cu, cv = (grid, grid) if np.isscalar(grid) else grid
    if cu < 2 or cv < 2:
        raise AssemblyError("grid needs at least two cells per direction")
    u, hu, wall_u = _axis(*chart.u_range, cu, axis=chart.u_axis)
    v, hv, wall_v = _axis(*chart.v_range, cv, periodic=chart.v_periodic)
    nu, nv = len(u), len(v)
    U, V = np.meshgrid(u, v, indexing="ij")

    def coef(uu, vv):
        a, b = chart.to_native(uu, vv)
        return tensor.phi(a, b) * np.exp(-drift.eta(a, b))

    c = coef(U, V)
    rho = chart.rho(U, V) * np.ones_like(U)
    if np.any(~(c > 0)) or np.any(~(rho > 0)):
        raise AssemblyError("nonpositive coefficient sampled on the grid")
    weight = np.exp(-drift.eta(*chart.to_native(U, V)))
    idx = np.arange(nu * nv).reshape(nu, nv)
    diag = np.zeros((nu, nv))
    rows, cols, vals = [], [], []

    def couple(ia, ib, g):
        rows.extend([ia.ravel(), ib.ravel()])
        cols.extend([ib.ravel(), ia.ravel()])
        vals.extend([-g.ravel(), -g.ravel()])

    # interior u-faces
    uf = 0.5 * (U[:-1] + U[1:])
    g = np.sqrt(c[:-1] * c[1:]) * chart.energy_u(uf, V[:-1]) * hv / hu
    diag[:-1] += g
    diag[1:] += g
    couple(idx[:-1], idx[1:], g)
    # u walls
    right = np.full(nv, chart.u_range[1])
    cb = coef(right, v)
    if np.any(~(cb > 0)):
        raise AssemblyError("nonpositive coefficient on the boundary")
    diag[-1] += np.sqrt(c[-1] * cb) * chart.energy_u(right, v) * hv / wall_u
    if not chart.u_axis:
        left = np.full(nv, chart.u_range[0])
        cb = coef(left, v)
        if np.any(~(cb > 0)):
            raise AssemblyError("nonpositive coefficient on the boundary")
        diag[0] += np.sqrt(c[0] * cb) * chart.energy_u(left, v) * hv / hu

    # v-faces
    vf = 0.5 * (V[:, :-1] + V[:, 1:])
    g = np.sqrt(c[:, :-1] * c[:, 1:]) * chart.energy_v(U[:, :-1], vf) * hu / hv
    diag[:, :-1] += g
    diag[:, 1:] += g
    couple(idx[:, :-1], idx[:, 1:], g)
    if chart.v_periodic:
        vwrap = np.full(nu, v[-1] + 0.5 * hv)
        g = np.sqrt(c[:, -1] * c[:, 0]) * chart.energy_v(u, vwrap) * hu / hv
        diag[:, -1] += g
        diag[:, 0] += g
        couple(idx[:, -1], idx[:, 0], g)
    else:
        for edge, col in ((chart.v_range[0], 0), (chart.v_range[1], -1)):
            vb = np.full(nu, edge)
            cb = coef(u, vb)
            if np.any(~(cb > 0)):
                raise AssemblyError("nonpositive coefficient on the boundary")
            diag[:, col] += np.sqrt(c[:, col] * cb) * chart.energy_v(u, vb) * hu / wall_v

    rows.append(idx.ravel())
    cols.append(idx.ravel())
    vals.append(diag.ravel())
    n = nu * nv
    K = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsr()
    K = 0.5 * (K + K.T)  # exact symmetry regardless of summation order
    M = sp.diags((weight * rho * hu * hv).ravel()).tocsr()
    dof_map = np.stack(np.unravel_index(np.arange(n), (nu, nv)), axis=1)
    return Pencil(K.tocsr(), M, (nu, nv), dof_map, (u, v), chart.chart_tag)


def spectrum_2d(pencil: Pencil, count: int, method: str = "auto") -> Spectrum:
    if count > pencil.dof // 4:
        raise AssemblyError(f"count {count} exceeds a quarter of the {pencil.dof} unknowns")
    spec = solve_generalized(pencil.K, pencil.M, count, method=method)
    spec.meta.update(grid=pencil.grid, chart=pencil.chart_tag)
    return spec


def richardson(fine, coarse, order: int = 2):
    """Extrapolated values and error estimates from grids with spacing ratio 2."""
    fine, coarse = np.asarray(fine, float), np.asarray(coarse, float)
    f = 2.0**order - 1.0
    return fine + (fine - coarse) / f, np.abs(fine - coarse) / f


def solve_domain(domain: DomainSpec, count: int, grid=64, tensor: Optional[TensorSpec] = None,
                 drift: Optional[DriftSpec] = None, extrapolate: bool = True,
                 method: str = "auto") -> Spectrum:
    """Lowest ``count`` eigenvalues on ``domain``; Richardson-extrapolated by default.

    With ``extrapolate`` the pencil is also solved on half the cells and the
    reported eigenvalues are ``lam_h + (lam_h - lam_2h)/3``; raw fine-grid
    values and per-eigenvalue estimates are kept in ``meta``.
    """
    tensor = tensor or domain.tensor or TensorSpec.identity()
    drift = drift or DriftSpec.none()
    chart = conformal_chart(domain)
    cu, cv = (grid, grid) if np.isscalar(grid) else grid
    fine = spectrum_2d(assemble(chart, tensor, drift, (cu, cv)), count, method)
    fine.meta.update(domain=domain.kind, cells=(cu, cv), raw=fine.eigenvalues.copy())
    if not extrapolate:
        fine.meta["estimate"] = np.full(count, np.nan)
        return fine
    if cu % 2 or cv % 2:
        raise AssemblyError("Richardson extrapolation needs an even number of cells")
    coarse = spectrum_2d(assemble(chart, tensor, drift, (cu // 2, cv // 2)), count, method)
    vals, est = richardson(fine.eigenvalues, coarse.eigenvalues)
    fine.meta.update(coarse=coarse.eigenvalues, estimate=est)
    return replace(fine, eigenvalues=vals)
