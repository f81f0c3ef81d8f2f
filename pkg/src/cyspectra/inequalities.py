"""Closed-form eigenvalue bounds and their checks against computed spectra.

Every check returns :class:`InequalityReport` objects whose ``lhs``/``rhs`` are
produced by a named formula applied to the echoed ``inputs``;
:func:`recompute` re-runs that formula, so a serialized report can be audited
without the spectrum it came from.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .domains import DomainSpec, TensorSpec, Wedge
from .geometry import a_const

DEFAULT_TOL = 1e-6


class InequalityError(ValueError):
    pass


@dataclass
class InequalityReport:
    name: str
    lhs: float
    rhs: float
    margin: float
    passed: bool
    slack: float
    strict: bool = False
    status: str = "pass"  # pass | fail | not-applicable
    k: Optional[int] = None
    inputs: dict = field(default_factory=dict)
    note: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


# ------------------------------------------------------------- formula registry
# Each formula maps an inputs dict to (lhs, rhs).  Checks and recompute() share
# these functions, which is what makes recomputation bit-identical.

_FORMULAS: Dict[str, Callable[[dict], tuple]] = {}


def _formula(*names):
    def deco(fn):
        for n in names:
            _FORMULAS[n] = fn
        return fn
    return deco


def _sides_quadratic(lams, k, eps, delta, C):
    lam = np.asarray(lams, float)
    top = lam[k]
    gaps = top - lam[:k]
    lhs = float(np.sum(gaps**2))
    rhs = float(np.sum(gaps * (4 * delta**2 / eps * lam[:k] + C)) / eps)
    return lhs, rhs


@_formula("universal_quadratic")
def _f_universal(inp):
    C = -((inp["n"] - 1) ** 2) * inp["eps"] ** 2 * inp["kappa"] ** 2
    return _sides_quadratic(inp["eigenvalues"], inp["k"], inp["eps"], inp["delta"], C)


@_formula("pinched_quadratic")
def _f_pinched(inp):
    return _sides_quadratic(inp["eigenvalues"], inp["k"], inp["eps"], inp["delta"],
                            pinched_constant(**_params_of(inp)))


@_formula("universal_first_eigenvalue")
def _f_universal_first(inp):
    return universal_lambda1_lower(inp["n"], inp["eps"], inp["delta"], inp["kappa"]), inp["lambda1"]


@_formula("pinched_first_eigenvalue")
def _f_pinched_first(inp):
    return lambda1_lower(PinchedParams(**_params_of(inp))).value, inp["lambda1"]


def _rec_stats(inp):
    v = np.asarray(inp["upsilon"], float)
    k = inp["k"]
    A = 2 * inp["delta"] ** 2 / inp["eps"] ** 2
    B = 1 + 4 * inp["delta"] ** 2 / inp["eps"] ** 2
    head = v[:k]
    m = float(np.mean(head))
    var = float(np.mean((head - m) ** 2))
    return v, k, A, B, m, A**2 * m**2 - B * var


@_formula("recursion_power")
def _f_rec_power(inp):
    v, k, A, B, _, _ = _rec_stats(inp)
    return float(v[k]), float(B * k**A * v[0])


@_formula("recursion_mean")
def _f_rec_mean(inp):
    v, k, A, B, m, _ = _rec_stats(inp)
    return float(v[k]), float(B * m)


@_formula("recursion_quadratic")
def _f_rec_quad(inp):
    v, k, A, B, m, disc = _rec_stats(inp)
    return float(v[k]), float((1 + A) * m + math.sqrt(max(disc, 0.0)))


@_formula("recursion_step")
def _f_rec_step(inp):
    v, k, A, B, m, disc = _rec_stats(inp)
    return float(v[k] - v[k - 1]), (2 * math.sqrt(disc) if disc >= 0 else float("nan"))


@_formula("gap_lower")
def _f_gap_lower(inp):
    return 3 * inp["eps"] * math.sin(inp["theta_star"]) ** 2 * inp["ell"] ** 2, inp["lambda2"] - inp["lambda1"]


@_formula("gap_upper")
def _f_gap_upper(inp):
    return inp["lambda2"] - inp["lambda1"], 3 * inp["delta"] * inp["ell"] ** 2


@_formula("gap_diameter")
def _f_gap_diameter(inp):
    return (inp["lambda2"] - inp["lambda1"]) * inp["D"] ** 2, 3 * math.pi**2 * inp["delta"]


@_formula("profile_normalization")
def _f_profile(inp):
    return inp["l2_norm"], 1.0


@_formula("bracket_lower")
def _f_bracket_lower(inp):
    return inp["lower"], inp["eigenvalue"]


@_formula("bracket_upper")
def _f_bracket_upper(inp):
    return inp["eigenvalue"], inp["upper"]


@_formula("weyl_counting", "weyl_mean", "weyl_mean_square")
def _f_weyl(inp):
    x = np.asarray(inp["x"], float)
    y = np.asarray(inp["y"], float)
    X = np.stack([np.ones_like(x), x], axis=1)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    limit = float(coef[0])
    return abs(limit - inp["target"]) / abs(inp["target"]), inp["tolerance"]


@_formula("direct")
def _f_direct(inp):
    return inp["lhs"], inp["rhs"]


def _decide(lhs, rhs, tol, strict, scale=None):
    scale = max(abs(lhs), abs(rhs)) if scale is None else scale
    slack = tol * scale
    margin = rhs - lhs
    ok = margin > slack if strict else margin >= -slack
    return margin, slack, bool(ok)


def _report(name, inputs, *, tol=DEFAULT_TOL, strict=False, k=None, note="", scale=None,
            formula=None):
    lhs, rhs = _FORMULAS[formula or name](inputs)
    if isinstance(rhs, float) and math.isnan(rhs):
        return InequalityReport(name, lhs, rhs, float("nan"), True, 0.0, strict,
                                "not-applicable", k, inputs, note)
    margin, slack, ok = _decide(lhs, rhs, tol, strict, scale)
    return InequalityReport(name, float(lhs), float(rhs), float(margin), ok, float(slack), strict,
                            "pass" if ok else "fail", k, inputs, note)


def bound_report(name: str, lhs: float, rhs: float, *, strict: bool = False, tol: float = DEFAULT_TOL,
                 k: Optional[int] = None, note: str = "", **extra) -> InequalityReport:
    """Report for a precomputed comparison ``lhs <= rhs`` (``<`` when strict)."""
    inputs = dict(extra, lhs=float(lhs), rhs=float(rhs), formula="direct")
    return _report(name, inputs, tol=tol, strict=strict, k=k, note=note, formula="direct")


def recompute(report: InequalityReport) -> tuple:
    """``(lhs, rhs)`` recomputed from the report's own inputs."""
    key = report.inputs.get("formula", report.name)
    return _FORMULAS[key](report.inputs)


def _eigs(spec) -> List[float]:
    vals = getattr(spec, "eigenvalues", spec)
    return [float(x) for x in np.asarray(vals, float)]


# ------------------------------------------------------------- hyperbolic space

def universal_lambda1_lower(n: int, eps: float, delta: float, kappa: float) -> float:
    return eps / (4 * delta**2) * (n - 1) ** 2 * eps**2 * kappa**2


def check_universal(spec, n: int, eps: float, delta: float, kappa: float, k: int,
                    tol: float = DEFAULT_TOL) -> InequalityReport:
    """Quadratic inequality for radially constant drifts in hyperbolic space.

    ``sum (lam_{k+1}-lam_i)^2 <= (1/eps) sum (lam_{k+1}-lam_i)((4 delta^2/eps) lam_i - (n-1)^2 eps^2 kappa^2)``.
    With ``kappa = 0`` and ``eps = delta = 1`` this is the classical
    ``sum (lam_{k+1}-lam_i)^2 <= 4 sum (lam_{k+1}-lam_i) lam_i``.
    """
    lams = _eigs(spec)
    if k < 1 or k + 1 > len(lams):
        raise InequalityError(f"k={k} needs {k + 1} eigenvalues, have {len(lams)}")
    inputs = dict(n=n, eps=eps, delta=delta, kappa=kappa, k=k, eigenvalues=lams[:k + 1])
    return _report("universal_quadratic", inputs, tol=tol, k=k, scale=abs(_f_universal(inputs)[1]))


def check_universal_lambda1(spec, n, eps, delta, kappa, tol: float = DEFAULT_TOL) -> InequalityReport:
    inputs = dict(n=n, eps=eps, delta=delta, kappa=kappa, lambda1=_eigs(spec)[0])
    return _report("universal_first_eigenvalue", inputs, tol=tol)


# ------------------------------------------------------------- pinched manifolds

@dataclass(frozen=True)
class PinchedParams:
    n: int
    eps: float
    delta: float
    kappa1: float
    kappa2: float
    d: float = math.inf  # distance from the domain to the origin; inf drops the 1/d terms
    C0: float = 0.0
    C1: float = 0.0

    def __post_init__(self):
        if not self.d > 0:
            raise InequalityError(f"d must be positive, got {self.d}")
        if not 0 < self.eps <= self.delta:
            raise InequalityError("need 0 < eps <= delta")
        if self.n < 2:
            raise InequalityError("n must be at least 2")

    @property
    def a(self) -> float:
        return a_const(self.n, self.eps, self.delta)

    @property
    def branch(self) -> str:
        return "a<=0" if self.a <= 0 else "a>0"


def _params_of(inp) -> dict:
    out = {f: inp[f] for f in ("n", "eps", "delta", "kappa1", "kappa2", "d", "C0", "C1")}
    out["d"] = float(out["d"])  # "inf" after a JSON round trip
    return out


def pinched_constant(n, eps, delta, kappa1, kappa2, d=math.inf, C0=0.0, C1=0.0) -> float:
    """Constant ``C`` with bracket ``(4 delta^2/eps) lam_i + C``; ``+a/d^2`` only when ``a > 0``."""
    inv_d = 0.0 if math.isinf(d) else 1.0 / d
    C = (-((n - 1) ** 2) * eps**2 * kappa2**2
         + 2 * (n - 1) * (delta**2 * kappa1**2 - eps**2 * kappa2**2)
         + 2 * C0 * (n - 1) * (kappa1 + inv_d) + C1)
    a = a_const(n, eps, delta)
    if a > 0:
        C += a * inv_d**2
    return C


def check_thm2(spec, params: PinchedParams, k: int, tol: float = DEFAULT_TOL) -> InequalityReport:
    """Quadratic inequality on a pinched Cartan-Hadamard manifold; branch by the sign of ``a``."""
    lams = _eigs(spec)
    if k < 1 or k + 1 > len(lams):
        raise InequalityError(f"k={k} needs {k + 1} eigenvalues, have {len(lams)}")
    inputs = dict(asdict(params), k=k, eigenvalues=lams[:k + 1], branch=params.branch)
    return _report("pinched_quadratic", inputs, tol=tol, k=k,
                   scale=abs(_f_pinched(inputs)[1]), note=f"branch {params.branch}")


@dataclass(frozen=True)
class FirstEigenvalueBound:
    value: float
    branch: str
    positivity_condition: bool  # sqrt(n+1) kappa2 > sqrt(2) kappa1


def lambda1_lower(params: PinchedParams) -> FirstEigenvalueBound:
    """``lam_1 >= (eps/4 delta^2) (-C)``; for ``T = I`` and constant drift this is positive iff
    ``sqrt(n+1) kappa2 > sqrt(2) kappa1``."""
    p = params
    value = -p.eps / (4 * p.delta**2) * pinched_constant(**asdict(p))
    cond = math.sqrt(p.n + 1) * p.kappa2 > math.sqrt(2) * p.kappa1
    return FirstEigenvalueBound(value, p.branch, cond)


def check_lambda1(spec, params: PinchedParams, tol: float = DEFAULT_TOL) -> InequalityReport:
    inputs = dict(asdict(params), lambda1=_eigs(spec)[0])
    return _report("pinched_first_eigenvalue", inputs, tol=tol)


# ------------------------------------------------------------- auxiliary sequences

@dataclass
class UpsilonSequence:
    values: np.ndarray
    branch: str
    constants: dict
    hypothesis_ok: bool = True

    @property
    def C(self) -> float:
        return self.constants["C"]


def _upsilon(lams, eps, delta, C, branch, constants, tol):
    lam = np.sort(np.asarray(lams, float))
    vals = 4 * delta**2 / eps * lam + C
    ok = bool(vals[0] >= -tol * max(1.0, abs(C)))
    return UpsilonSequence(vals, branch, dict(constants, C=C, eps=eps, delta=delta), ok)


def upsilon(spec, params: PinchedParams, tol: float = DEFAULT_TOL) -> UpsilonSequence:
    """``ups_i = (4 delta^2/eps) lam_i + C`` with the branch constant of :func:`pinched_constant`.

    ``hypothesis_ok`` is False when ``ups_1`` is negative beyond tolerance,
    which can only happen if the hypotheses behind the bound are violated.
    """
    return _upsilon(_eigs(spec), params.eps, params.delta, pinched_constant(**asdict(params)),
                    params.branch, asdict(params), tol)


def universal_upsilon(spec, n, eps, delta, kappa, tol: float = DEFAULT_TOL) -> UpsilonSequence:
    C = -((n - 1) ** 2) * eps**2 * kappa**2
    return _upsilon(_eigs(spec), eps, delta, C, "universal",
                    dict(n=n, kappa=kappa), tol)


def check_recursions(ups: UpsilonSequence, k: int, tol: float = DEFAULT_TOL) -> List[InequalityReport]:
    """Power, mean, quadratic-mean and step bounds for ``ups_{k+1}``.

    The step bound needs a nonnegative discriminant; otherwise it is reported
    as not applicable rather than failed.
    """
    if k < 1 or len(ups.values) < k + 1:
        raise InequalityError(f"k={k} needs {k + 1} sequence values")
    base = dict(k=k, eps=ups.constants["eps"], delta=ups.constants["delta"],
                upsilon=[float(x) for x in ups.values[:k + 1]], branch=ups.branch)
    out = []
    for name in ("recursion_power", "recursion_mean", "recursion_quadratic", "recursion_step"):
        note = ""
        if name in ("recursion_quadratic", "recursion_step") and _rec_stats(base)[-1] < 0:
            note = "negative discriminant"
        out.append(_report(name, dict(base), tol=tol, k=k, note=note))
    return out


# ------------------------------------------------------------- wedge gap

def _wedge_inputs(domain: DomainSpec) -> dict:
    w = domain.variant
    if not isinstance(w, Wedge):
        raise InequalityError("wedge domain required")
    return dict(ell=w.ell, theta0=w.theta0, theta1=w.theta1, theta_star=w.theta_star,
                eps=domain.tensor.eps, delta=domain.tensor.delta)


def theta_brackets(domain: DomainSpec, mu: float) -> tuple:
    """Bounds on the first two angular eigenvalues at separation constant ``mu``:
    ``eps sin^2(theta*) (mu + j^2 pi^2/L^2) <= lam_j^mu <= delta (mu + j^2 pi^2/L^2)``."""
    w = _wedge_inputs(domain)
    base = math.pi**2 / (w["theta1"] - w["theta0"]) ** 2
    s2 = math.sin(w["theta_star"]) ** 2
    return tuple((w["eps"] * s2 * (mu + j * j * base), w["delta"] * (mu + j * j * base)) for j in (1, 2))


def check_brackets(domain: DomainSpec, mu: float, eigenvalues: Sequence[float],
                   tol: float = DEFAULT_TOL) -> List[InequalityReport]:
    out = []
    for j, ((lo, hi), lam) in enumerate(zip(theta_brackets(domain, mu), eigenvalues), start=1):
        base = dict(mu=mu, index=j, eigenvalue=float(lam), lower=lo, upper=hi)
        out.append(_report("bracket_lower", base, tol=tol, k=j))
        out.append(_report("bracket_upper", base, tol=tol, k=j))
    return out


def check_gap(domain: DomainSpec, gap_result, D: float,
              tol: float = DEFAULT_TOL) -> List[InequalityReport]:
    """Strict gap bounds, the diameter product and the profile normalization.

    ``inputs`` also carries ``pi^2/(ell^2 D^2)``, which tends to 1 in the
    regime where the diameter bound is asserted.
    """
    w = _wedge_inputs(domain)
    base = dict(w, lambda1=gap_result.lambda1, lambda2=gap_result.lambda2, D=float(D),
                branch=gap_result.branch,
                diameter_ratio=math.pi**2 / (w["ell"] ** 2 * D**2))
    out = [_report(name, dict(base), tol=tol, strict=True)
           for name in ("gap_lower", "gap_upper", "gap_diameter")]
    for s, norm in zip(gap_result.s_values, gap_result.l2_norms):
        inputs = dict(s=float(s), l2_norm=float(norm), formula="profile_normalization")
        out.append(_report(f"profile_normalization_s={float(s):g}", inputs, tol=tol, strict=True,
                           formula="profile_normalization"))
    return out


# ------------------------------------------------------------- Weyl

def weyl_constant(domain: DomainSpec, tensor: Optional[TensorSpec] = None, samples: int = 512) -> float:
    """``c0 = (4 pi)^-1 int phi^-1 dvol`` by midpoint quadrature on the chart."""
    from .assembly2d import conformal_chart

    tensor = tensor or domain.tensor or TensorSpec.identity()
    chart = conformal_chart(domain)
    (u0, u1), (v0, v1) = chart.u_range, chart.v_range
    hu, hv = (u1 - u0) / samples, (v1 - v0) / samples
    U, V = np.meshgrid(u0 + hu * (np.arange(samples) + 0.5), v0 + hv * (np.arange(samples) + 0.5),
                       indexing="ij")
    a, b = chart.to_native(U, V)
    integrand = chart.rho(U, V) / tensor.phi(a, b)
    return float(np.sum(integrand) * hu * hv / (4 * math.pi))


def weyl_targets(c0: float, n: int = 2) -> dict:
    return {
        "weyl_counting": c0,
        "weyl_mean": n / (n + 2) * c0 ** (-2 / n),
        "weyl_mean_square": n / (n + 4) * c0 ** (-4 / n),
    }


def weyl_fit(x, y) -> tuple:
    """Least-squares ``y = limit + slope * x``."""
    X = np.stack([np.ones_like(x), x], axis=1)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return float(coef[0]), float(coef[1])


def check_weyl(spec, c0: float, n: int = 2, tolerances=(0.05, 0.05, 0.08), estimates=None,
               reliable_rel: float = 0.05, min_count: int = 100) -> List[InequalityReport]:
    """Trend checks for ``N(lam)/lam^(n/2)``, ``mean(lam)/k^(2/n)`` and ``mean(lam^2)/k^(4/n)``.

    The window is the top half of the reliable range.  Each ratio is fitted as
    ``limit + b x`` with ``x = lam^(-1/2)`` (counting) or ``k^(-1/n)`` (means),
    which absorbs the boundary correction of relative order ``lam^(-1/2)``.
    ``lhs`` is the relative deviation of the fitted limit from its target.
    """
    lam = np.asarray(_eigs(spec), float)
    if estimates is not None:
        rel = np.asarray(estimates, float) / np.abs(lam)
        bad = np.flatnonzero(~(rel <= reliable_rel))
        if bad.size:
            lam = lam[:bad[0]]
    K = len(lam)
    if K < min_count:
        raise InequalityError(f"need at least {min_count} reliable eigenvalues, have {K}")
    ks = np.arange(1, K + 1, dtype=float)
    win = slice(K // 2, K)
    targets = weyl_targets(c0, n)
    series = {
        "weyl_counting": (lam[win] ** -0.5, ks[win] / lam[win] ** (n / 2)),
        "weyl_mean": (ks[win] ** (-1 / n), (np.cumsum(lam) / ks)[win] / ks[win] ** (2 / n)),
        "weyl_mean_square": (ks[win] ** (-1 / n), (np.cumsum(lam**2) / ks)[win] / ks[win] ** (4 / n)),
    }
    out = []
    for (name, (x, y)), tol in zip(series.items(), tolerances):
        limit, slope = weyl_fit(x, y)
        inputs = dict(x=[float(v) for v in x], y=[float(v) for v in y], target=targets[name],
                      tolerance=tol, n=n, window=[K // 2 + 1, K], limit=limit, slope=slope)
        out.append(_report(name, inputs, tol=0.0,
                           note=f"fitted limit {limit:.6g} vs target {targets[name]:.6g}"))
    return out


# ------------------------------------------------------------- serialization

def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def reports_to_json(reports: Sequence[InequalityReport], indent: int = 2) -> str:
    return json.dumps([_clean(r.to_dict()) for r in reports], indent=indent, sort_keys=True)


CSV_FIELDS = ("name", "k", "lhs", "rhs", "margin", "slack", "strict", "status", "pass", "note")


def reports_to_csv(reports: Sequence[InequalityReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in reports:
        d = r.to_dict()
        w.writerow([_clean(d[f]) if f not in ("lhs", "rhs", "margin", "slack") else repr(float(d[f]))
                    for f in CSV_FIELDS])
    return buf.getvalue()
