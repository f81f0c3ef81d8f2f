"""Domain families, coefficient tensors and drifting functions.

Every domain has *native coordinates* ``(a, b)`` in which its scalar fields are
evaluated:

========================  ===========================================
variant                   native coordinates
========================  ===========================================
:class:`Wedge`            Euclidean polar ``(r, theta)`` of the half-plane
:class:`HalfPlaneRect`    half-plane ``(x, y)``
:class:`Annulus`          geodesic polar ``(r, omega)`` about the origin
:class:`Ball`             geodesic polar ``(r, omega)`` about the centre
:class:`Rectangle`        Euclidean ``(x, y)``
:class:`Disk`             Euclidean polar ``(r, theta)``
========================  ===========================================

For the annulus and ball only one great circle ``omega in [0, 2 pi]`` of the
angular sphere is sampled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .geometry import DomainError

Fn = Callable[[np.ndarray, np.ndarray], np.ndarray]

FD_STEP = 1e-5
DEFAULT_SAMPLES = 512


class ConstraintViolation(ValueError):
    """A domain constraint failed; carries both sides of the inequality."""

    def __init__(self, name: str, lhs: float, rhs: float, relation: str = "<"):
        self.name = name
        self.lhs = float(lhs)
        self.rhs = float(rhs)
        self.relation = relation
        super().__init__(f"constraint '{name}' violated: need {self.lhs!r} {relation} {self.rhs!r}")


@dataclass(frozen=True)
class ScalarField:
    """A smooth function of the native coordinates ``(a, b)``.

    Analytic partial derivatives are used when supplied; otherwise centred
    differences with a step of ``FD_STEP`` scaled by ``max(1, |x|)``.
    """

    value: Fn
    d_a: Optional[Fn] = None
    d_aa: Optional[Fn] = None
    d_b: Optional[Fn] = None
    d_bb: Optional[Fn] = None
    label: str = ""

    def __call__(self, a, b):
        a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
        return np.asarray(self.value(a, b), float) * np.ones_like(a)

    def _fd(self, a, b, axis, order):
        a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
        x = a if axis == 0 else b
        h = FD_STEP * np.maximum(1.0, np.abs(x))
        if axis == 0:
            fp, fm = self(a + h, b), self(a - h, b)
        else:
            fp, fm = self(a, b + h), self(a, b - h)
        if order == 1:
            return (fp - fm) / (2 * h)
        return (fp - 2 * self(a, b) + fm) / h**2

    def _pick(self, fn, a, b, axis, order):
        if fn is None:
            return self._fd(a, b, axis, order)
        a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
        return np.asarray(fn(a, b), float) * np.ones_like(a)

    def da(self, a, b):
        return self._pick(self.d_a, a, b, 0, 1)

    def daa(self, a, b):
        return self._pick(self.d_aa, a, b, 0, 2)

    def db(self, a, b):
        return self._pick(self.d_b, a, b, 1, 1)

    def dbb(self, a, b):
        return self._pick(self.d_bb, a, b, 1, 2)

    @classmethod
    def constant(cls, c: float = 0.0) -> "ScalarField":
        zero = lambda a, b: np.zeros_like(a)
        return cls(lambda a, b: np.full_like(a, c), zero, zero, zero, zero, label=f"const({c})")


@dataclass(frozen=True)
class TensorSpec:
    """Scalar tensor ``T = phi * I`` with certified bounds ``eps <= phi <= delta``."""

    phi: ScalarField
    eps: float
    delta: float
    radially_parallel: bool = True

    def __post_init__(self):
        if not (0 < self.eps <= self.delta):
            raise ConstraintViolation("tensor-bounds", self.eps, self.delta, "<=")

    def validate(self, domain: "DomainSpec", samples: int = 64) -> None:
        a, b = sample_grid(domain, samples, closed=True)
        vals = self.phi(a, b)
        tol = 1e-12 * max(1.0, self.delta)
        if vals.min() < self.eps - tol:
            raise ConstraintViolation("phi>=eps", float(vals.min()), self.eps, ">=")
        if vals.max() > self.delta + tol:
            raise ConstraintViolation("phi<=delta", float(vals.max()), self.delta, "<=")
        if self.radially_parallel and domain.has_radial:
            dr, _ = radial_derivatives(domain, self.phi, a, b)
            worst = float(np.max(np.abs(dr)))
            if worst >= 1e-10:
                raise ConstraintViolation("radially-parallel", worst, 1e-10)

    @classmethod
    def identity(cls) -> "TensorSpec":
        return cls(ScalarField.constant(1.0), 1.0, 1.0, True)

    @classmethod
    def constant(cls, c: float) -> "TensorSpec":
        return cls(ScalarField.constant(c), c, c, True)


@dataclass(frozen=True)
class DriftSpec:
    """The drifting function; the weighted measure is ``exp(-eta) dvol``."""

    eta: ScalarField

    @classmethod
    def none(cls) -> "DriftSpec":
        return cls(ScalarField.constant(0.0))


# ---------------------------------------------------------------- variants

@dataclass(frozen=True)
class Wedge:
    ell: float
    theta0: float
    theta1: float

    @property
    def theta_star(self) -> float:
        return min(self.theta0, math.pi - self.theta1)

    @property
    def t_max(self) -> float:
        return math.pi / self.ell

    @property
    def r_max(self) -> float:
        return math.exp(math.pi / self.ell)


@dataclass(frozen=True)
class HalfPlaneRect:
    x0: float
    x1: float
    y0: float
    y1: float


@dataclass(frozen=True)
class Annulus:
    n: int
    kappa1: float
    c: float
    R: float
    alpha: float

    @property
    def inner_radius(self) -> float:
        return math.sqrt((2 * (self.n - 1) * (self.kappa1 + self.alpha) * self.R + 2) / self.c)


@dataclass(frozen=True)
class Ball:
    n: int
    kappa: float
    a: float
    m: int = 0


@dataclass(frozen=True)
class Rectangle:
    width: float
    height: float


@dataclass(frozen=True)
class Disk:
    radius: float


Variant = Union[Wedge, HalfPlaneRect, Annulus, Ball, Rectangle, Disk]


@dataclass(frozen=True)
class Model:
    """Ambient model: ``'hyperbolic'`` with curvature ``-kappa**2`` or ``'euclidean'``."""

    kind: str = "euclidean"
    kappa: float = 0.0


@dataclass(frozen=True)
class DomainSpec:
    variant: Variant
    model: Model = field(default_factory=Model)
    origin_distance: Optional[float] = None
    tensor: Optional[TensorSpec] = None

    @property
    def kind(self) -> str:
        return type(self.variant).__name__.lower()

    @property
    def has_radial(self) -> bool:
        return not isinstance(self.variant, Rectangle)


# ------------------------------------------------------------ constructors

def max_admissible_ell(theta0: float, theta1: float, eps: float, delta: float) -> float:
    """Largest ``ell`` for which the branch-ordering condition on the wedge holds."""
    s2 = math.sin(min(theta0, math.pi - theta1)) ** 2
    ratio = (4 * eps * s2 - delta) / (4 * delta - eps * s2)
    bound = math.pi**2 / (theta1 - theta0) ** 2 * ratio
    return math.sqrt(bound) if bound > 0 else 0.0


def make_wedge(ell: float, theta0: float, theta1: float, tensor: TensorSpec,
               validate_tensor: bool = True) -> DomainSpec:
    """The wedge ``{1 < r < exp(pi/ell), theta0 < theta < theta1}`` in the half-plane."""
    if not ell > 0:
        raise ConstraintViolation("ell>0", 0.0, ell)
    if not (0 < theta0 < math.pi / 2):
        raise ConstraintViolation("0<theta0<pi/2", theta0, math.pi / 2)
    if not (math.pi / 2 < theta1 < math.pi):
        raise ConstraintViolation("pi/2<theta1<pi", math.pi / 2, theta1)
    w = Wedge(ell, theta0, theta1)
    if not w.theta_star > math.pi / 6:
        raise ConstraintViolation("theta_star>pi/6", math.pi / 6, w.theta_star)
    eps, delta = tensor.eps, tensor.delta
    if not eps > delta / 4:
        raise ConstraintViolation("eps>delta/4", delta / 4, eps)
    s2 = math.sin(w.theta_star) ** 2
    bound = math.pi**2 / (theta1 - theta0) ** 2 * (4 * eps * s2 - delta) / (4 * delta - eps * s2)
    if not bound >= ell**2:
        raise ConstraintViolation("ell-bound", ell**2, bound, "<=")
    dom = DomainSpec(w, Model("hyperbolic", 1.0), None, tensor)
    if validate_tensor:
        tensor.validate(dom)
    return dom


def make_annulus(n: int, kappa1: float, c: float, R: float, alpha: float) -> DomainSpec:
    """Annulus about the origin on which ``eta = (c/2) r^2`` cancels the drift constants.

    ``alpha`` is a free input; the returned domain records the inner radius as
    ``origin_distance``.
    """
    if n < 2:
        raise ConstraintViolation("n>=2", 2, n, "<=")
    if kappa1 < 0 or c <= 0 or R <= 0 or alpha <= 0:
        raise DomainError("kappa1 must be nonnegative and c, R, alpha positive")
    s = (n - 1) * (kappa1 + alpha)
    threshold = s + math.sqrt(s**2 + 2 * c)
    if not c * R > threshold:
        raise ConstraintViolation("cR-threshold", threshold, c * R, "<")
    ann = Annulus(n, kappa1, c, R, alpha)
    model = Model("hyperbolic", kappa1) if kappa1 > 0 else Model("euclidean", 0.0)
    return DomainSpec(ann, model, ann.inner_radius, None)


def make_ball(n: int, kappa: float, a: float, m: int = 0) -> DomainSpec:
    if n < 2 or a <= 0 or m < 0 or kappa < 0:
        raise DomainError("ball needs n >= 2, a > 0, m >= 0, kappa >= 0")
    model = Model("hyperbolic", kappa) if kappa > 0 else Model("euclidean", 0.0)
    return DomainSpec(Ball(n, kappa, a, int(m)), model)


def make_halfplane_rect(x0: float, x1: float, y0: float, y1: float, kappa: float = 1.0,
                        tensor: Optional[TensorSpec] = None) -> DomainSpec:
    if not (x0 < x1 and 0 < y0 < y1):
        raise DomainError("half-plane rectangle needs x0 < x1 and 0 < y0 < y1")
    if not kappa > 0:
        raise DomainError("kappa must be positive")
    return DomainSpec(HalfPlaneRect(x0, x1, y0, y1), Model("hyperbolic", kappa), None, tensor)


def make_rectangle(width: float, height: float) -> DomainSpec:
    if width <= 0 or height <= 0:
        raise DomainError("rectangle sides must be positive")
    return DomainSpec(Rectangle(width, height))


def make_disk(radius: float) -> DomainSpec:
    if radius <= 0:
        raise DomainError("radius must be positive")
    return DomainSpec(Disk(radius))


# ------------------------------------------------------------ sampling

def native_bounds(domain: DomainSpec):
    """Closed coordinate box ``((a0, a1), (b0, b1))`` covering the domain."""
    v = domain.variant
    if isinstance(v, Wedge):
        return (1.0, v.r_max), (v.theta0, v.theta1)
    if isinstance(v, HalfPlaneRect):
        return (v.x0, v.x1), (v.y0, v.y1)
    if isinstance(v, Annulus):
        return (v.inner_radius, v.R), (0.0, 2 * math.pi)
    if isinstance(v, Ball):
        return (0.0, v.a), (0.0, 2 * math.pi)
    if isinstance(v, Rectangle):
        return (0.0, v.width), (0.0, v.height)
    if isinstance(v, Disk):
        return (0.0, v.radius), (0.0, 2 * math.pi)
    raise DomainError(f"unsupported variant {v!r}")


def sample_grid(domain: DomainSpec, samples: int = DEFAULT_SAMPLES, closed: bool = True):
    """Uniform tensor grid in native coordinates.

    ``closed=True`` gives ``samples + 1`` points per axis including the boundary
    (doubling ``samples`` nests the grids); ``closed=False`` gives ``samples``
    cell midpoints.  The wedge is sampled uniformly in ``log r``.
    """
    if samples < 1:
        raise DomainError("empty sampling grid")
    (a0, a1), (b0, b1) = native_bounds(domain)
    log_r = isinstance(domain.variant, Wedge)
    if log_r:
        a0, a1 = math.log(a0), math.log(a1)
    if closed:
        a = np.linspace(a0, a1, samples + 1)
        b = np.linspace(b0, b1, samples + 1)
    else:
        a = a0 + (np.arange(samples) + 0.5) * (a1 - a0) / samples
        b = b0 + (np.arange(samples) + 0.5) * (b1 - b0) / samples
    if log_r:
        a = np.exp(a)
        if closed:
            a[0], a[-1] = 1.0, domain.variant.r_max
    return np.meshgrid(a, b, indexing="ij")


def radial_derivatives(domain: DomainSpec, f: ScalarField, a, b):
    """First and second derivatives of ``f`` along the radial direction of the domain.

    Polar variants differentiate in the first native coordinate.  On the
    half-plane the distance-like function is ``log y``, so ``d/dr = y d/dy``.
    """
    if isinstance(domain.variant, HalfPlaneRect):
        fy, fyy = f.db(a, b), f.dbb(a, b)
        return b * fy, b * fy + b**2 * fyy
    if not domain.has_radial:
        raise DomainError(f"{domain.kind} has no radial direction")
    return f.da(a, b), f.daa(a, b)


@dataclass(frozen=True)
class DriftConstants:
    C0: float
    C1: float
    samples: int


def drift_constants(domain: DomainSpec, drift: DriftSpec, delta: float,
                    samples: int = DEFAULT_SAMPLES) -> DriftConstants:
    """``C0 = delta^2 max|eta'|`` and ``C1 = delta^2 max(2 eta'' - eta'^2)`` over the closed domain."""
    a, b = sample_grid(domain, samples, closed=True)
    if a.size == 0:
        raise DomainError("empty domain")
    d1, d2 = radial_derivatives(domain, drift.eta, a, b)
    C0 = delta**2 * float(np.max(np.abs(d1)))
    C1 = delta**2 * float(np.max(2 * d2 - d1**2))
    return DriftConstants(C0, C1, samples)


def annulus_drift_sum(domain: DomainSpec, consts: DriftConstants) -> float:
    """``2 C0 (n-1)(kappa1 + alpha) + C1``, which vanishes for the quadratic radial drift."""
    v = domain.variant
    if not isinstance(v, Annulus):
        raise DomainError("annulus domain required")
    return 2 * consts.C0 * (v.n - 1) * (v.kappa1 + v.alpha) + consts.C1


def eta_residual(tensor: TensorSpec, drift: DriftSpec, domain: DomainSpec,
                 samples: int = DEFAULT_SAMPLES) -> float:
    """Max of ``|2 div(phi grad eta) - phi |grad eta|^2|`` on an interior wedge grid.

    Uses the polar expansion of the half-plane metric:
    ``div(phi grad eta) = phi (r^2 s^2 eta_rr + r s^2 eta_r + s^2 eta_tt)
    + r^2 s^2 phi_r eta_r + s^2 phi_t eta_t`` with ``s = sin(theta)``.
    """
    if not isinstance(domain.variant, Wedge):
        raise DomainError("eta_residual is defined on wedge domains")
    r, th = sample_grid(domain, samples, closed=False)
    phi, eta = tensor.phi, drift.eta
    s2 = np.sin(th) ** 2
    p = phi(r, th)
    er, err_, et, ett = eta.da(r, th), eta.daa(r, th), eta.db(r, th), eta.dbb(r, th)
    div = p * (r**2 * s2 * err_ + r * s2 * er + s2 * ett) + r**2 * s2 * phi.da(r, th) * er + s2 * phi.db(r, th) * et
    quad = p * (r**2 * s2 * er**2 + s2 * et**2)
    return float(np.max(np.abs(2 * div - quad)))


# ------------------------------------------------------ stock fields

def sin_theta_tensor(theta0: float, theta1: float) -> TensorSpec:
    """``phi = sin(theta)`` with its exact bounds on ``[theta0, theta1]``."""
    phi = ScalarField(
        lambda r, t: np.sin(t),
        d_a=lambda r, t: np.zeros_like(r),
        d_aa=lambda r, t: np.zeros_like(r),
        d_b=lambda r, t: np.cos(t),
        d_bb=lambda r, t: -np.sin(t),
        label="sin(theta)",
    )
    eps = min(math.sin(theta0), math.sin(theta1))
    delta = 1.0 if theta0 <= math.pi / 2 <= theta1 else max(math.sin(theta0), math.sin(theta1))
    return TensorSpec(phi, eps, delta, True)


def log_tan_drift() -> DriftSpec:
    """``eta = -2 log(1 - log tan(theta/2))`` (depends on the angle only)."""
    g = lambda t: 1.0 - np.log(np.tan(t / 2))
    zero = lambda r, t: np.zeros_like(r)
    return DriftSpec(ScalarField(
        lambda r, t: -2 * np.log(g(t)),
        d_a=zero, d_aa=zero,
        d_b=lambda r, t: 2 / (np.sin(t) * g(t)),
        d_bb=lambda r, t: -2 * np.cos(t) / (np.sin(t) ** 2 * g(t)) + 2 / (np.sin(t) ** 2 * g(t) ** 2),
        label="-2log(1-log tan(theta/2))",
    ))


def log_radius_drift(ell: float) -> DriftSpec:
    """``eta = -2 log(pi - ell log r)`` on the wedge of parameter ``ell``."""
    s = lambda r: math.pi - ell * np.log(r)
    zero = lambda r, t: np.zeros_like(t)
    return DriftSpec(ScalarField(
        lambda r, t: -2 * np.log(s(r)),
        d_a=lambda r, t: 2 * ell / (r * s(r)),
        d_aa=lambda r, t: -2 * ell / (r**2 * s(r)) + 2 * ell**2 / (r**2 * s(r) ** 2),
        d_b=zero, d_bb=zero,
        label=f"-2log(pi-{ell}log r)",
    ))


def minus_two_log_r_drift() -> DriftSpec:
    """``eta = -2 log r``; solves ``2 eta'' - eta'^2 = 0`` in the radial variable."""
    zero = lambda r, w: np.zeros_like(r)
    return DriftSpec(ScalarField(
        lambda r, w: -2 * np.log(r),
        d_a=lambda r, w: -2 / r,
        d_aa=lambda r, w: 2 / r**2,
        d_b=zero, d_bb=zero,
        label="-2log r",
    ))


def quadratic_radial_drift(c: float) -> DriftSpec:
    """``eta = (c/2) r^2``."""
    zero = lambda r, w: np.zeros_like(r)
    return DriftSpec(ScalarField(
        lambda r, w: 0.5 * c * r**2,
        d_a=lambda r, w: c * r,
        d_aa=lambda r, w: np.full_like(r, c),
        d_b=zero, d_bb=zero,
        label=f"({c}/2)r^2",
    ))


def horizontal_drift(amplitude: float = 0.5, frequency: float = 2.0) -> DriftSpec:
    """``eta = amplitude * sin(frequency * x)`` on the half-plane; constant along ``log y``."""
    zero = lambda x, y: np.zeros_like(y)
    return DriftSpec(ScalarField(
        lambda x, y: amplitude * np.sin(frequency * x),
        d_a=lambda x, y: amplitude * frequency * np.cos(frequency * x),
        d_aa=lambda x, y: -amplitude * frequency**2 * np.sin(frequency * x),
        d_b=zero, d_bb=zero,
        label=f"{amplitude}sin({frequency}x)",
    ))


def boundary_points(domain: DomainSpec, samples: int = 256) -> np.ndarray:
    """Points on the boundary in half-plane coordinates ``(x, y)``, shape ``(m, 2)``.

    Wedge edges are sampled uniformly in ``log r`` and ``theta``; corners are included.
    """
    v = domain.variant
    if isinstance(v, Wedge):
        logr = np.linspace(0.0, v.t_max, samples + 1)
        th = np.linspace(v.theta0, v.theta1, samples + 1)
        r = np.concatenate([np.exp(logr), np.exp(logr), np.ones_like(th), np.full_like(th, v.r_max)])
        t = np.concatenate([np.full_like(logr, v.theta0), np.full_like(logr, v.theta1), th, th])
        return np.stack([r * np.cos(t), r * np.sin(t)], axis=1)
    if isinstance(v, HalfPlaneRect):
        xs = np.linspace(v.x0, v.x1, samples + 1)
        ys = np.exp(np.linspace(math.log(v.y0), math.log(v.y1), samples + 1))
        x = np.concatenate([xs, xs, np.full_like(ys, v.x0), np.full_like(ys, v.x1)])
        y = np.concatenate([np.full_like(xs, v.y0), np.full_like(xs, v.y1), ys, ys])
        return np.stack([x, y], axis=1)
    raise DomainError(f"boundary sampling is only defined for half-plane domains, not {domain.kind}")
