import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cyspectra.geometry import (ComparisonValue, CurvaturePinch, DomainError, a_const,
                                box_r_bounds, hessian_ratio, hyperbolic_distance,
                                max_pairwise_distance, sn)

from oracles import coth_series, geodesic_distance_shooting, rk4_sn


def test_sn_flat_branch_is_identity():
    assert sn(0, 2.0) == 2.0


@pytest.mark.parametrize("kappa,r,expected", [(-1, 1.0, math.sinh(1.0)), (-4, 0.5, math.sinh(1.0) / 2)])
def test_sn_matches_ode_integration(kappa, r, expected):
    oracle = rk4_sn(kappa, r)
    assert abs(oracle - expected) < 1e-8
    assert abs(sn(kappa, r) - oracle) < 1e-8


def test_sn_positive_curvature_branch():
    assert abs(sn(1.0, 0.7) - rk4_sn(1.0, 0.7)) < 1e-8


@pytest.mark.parametrize("bad", [0.0, -1.0])
def test_sn_rejects_nonpositive_radius(bad):
    with pytest.raises(DomainError):
        sn(-1, bad)
    with pytest.raises(DomainError):
        hessian_ratio(-1, bad)


@pytest.mark.parametrize("kappa", [-4.0, -1.0, -0.25, 0.0])
def test_sn_satisfies_its_ode(kappa):
    r = np.linspace(0.1, 3.0, 200)
    h = 1e-3
    second = (sn(kappa, r + h) - 2 * sn(kappa, r) + sn(kappa, r - h)) / h**2
    resid = second + kappa * sn(kappa, r)
    scale = np.maximum(1.0, np.abs(sn(kappa, r)))
    # O(h^2) truncation of the stencil dominates; 1e-8 relative needs h = 1e-3 here
    assert np.max(np.abs(resid) / scale) < 1e-5
    assert np.max(np.abs(sn(kappa, r) - [rk4_sn(kappa, x, 1e-3) for x in r])) < 1e-8


def test_hessian_ratio_examples():
    assert hessian_ratio(0, 4.0) == 0.25
    assert abs(hessian_ratio(-1, 1.0) - coth_series(1.0)) < 1e-10
    vals = [hessian_ratio(-1, r) for r in (1, 2, 4)]
    assert vals[0] > vals[1] > vals[2]


def test_hessian_ratio_small_argument_series():
    for x in (1e-5, 3e-5, 9e-5):
        assert abs(hessian_ratio(-1, x) - coth_series(x)) / coth_series(x) < 1e-14


def test_hessian_ratio_large_r_limit():
    for k in (0.5, 1.0, 2.0):
        assert abs(hessian_ratio(-k * k, 50.0) - k) < 1e-10


@settings(max_examples=60, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.01, 20.0), st.floats(1.001, 2.0))
def test_hessian_ratio_strictly_decreasing(k, r, factor):
    # beyond k r ~ 18, coth rounds to exactly 1 in double precision
    r = min(r, 8.0 / k)
    assert hessian_ratio(-k * k, r * factor) < hessian_ratio(-k * k, r)


def test_box_r_bounds_examples():
    b = box_r_bounds(2, 1, 1, CurvaturePinch(1, 1), 1.0)
    assert b.lo == b.hi
    assert abs(b.lo - coth_series(1.0)) < 1e-12
    b = box_r_bounds(3, 1, 2, CurvaturePinch(1, 0), 2.0)
    assert abs(b.lo - 1.0) < 1e-14
    # coth from the ODE oracle: sn'/sn with sn' = cosh
    coth2 = math.cosh(2.0) / rk4_sn(-1.0, 2.0)
    assert abs(b.hi - 4 * coth2) < 1e-7


def test_box_r_bounds_contain_laplacian_of_distance_on_h2():
    # in H^2(-1), the Laplacian of the distance is coth(r); with T = phi I, box r = phi coth r
    pinch = CurvaturePinch(1.0, 1.0)
    rng = np.random.default_rng(1)
    for r in np.linspace(0.2, 6.0, 25):
        phi = rng.uniform(0.5, 2.0)
        b = box_r_bounds(2, 0.5, 2.0, pinch, r)
        assert phi * coth_series(r) in b


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 8), st.floats(0.1, 2.0), st.floats(1.0, 3.0), st.floats(0.0, 2.0),
       st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.05, 10.0), st.floats(0.0, 1.0))
def test_box_r_bounds_contain_model_value(n, eps, ratio, k1, t_model, t_phi, r, _):
    delta = eps * ratio
    k2 = k1 * 0.5
    pinch = CurvaturePinch(k1, k2)
    k_model = k2 + t_model * (k1 - k2)
    phi = eps + t_phi * (delta - eps)
    value = (n - 1) * phi * hessian_ratio(-k_model**2, r)
    b = box_r_bounds(n, eps, delta, pinch, r)
    assert b.lo * (1 - 1e-12) <= value <= b.hi * (1 + 1e-12)


def test_box_r_bounds_preconditions():
    with pytest.raises(DomainError):
        box_r_bounds(1, 1, 1, CurvaturePinch(1, 1), 1.0)
    with pytest.raises(DomainError):
        box_r_bounds(2, 2, 1, CurvaturePinch(1, 1), 1.0)
    with pytest.raises(DomainError):
        CurvaturePinch(1.0, 2.0)
    with pytest.raises(DomainError):
        ComparisonValue(2.0, 1.0)


def test_a_const_examples():
    assert a_const(2, 1, 1) == 1
    assert a_const(3, 1, 1) == 0
    assert a_const(4, 1, 1) == -3


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 50), st.floats(1e-3, 1e3))
def test_a_const_sign_for_equal_bounds(n, eps):
    assert a_const(n, eps, eps) <= 0
    assert math.isclose(a_const(2, eps, eps), eps**2, rel_tol=1e-12)


def test_hyperbolic_distance_examples():
    assert hyperbolic_distance((0.3, 2.0), (0.3, 2.0)) == 0.0
    assert abs(hyperbolic_distance((0, 1), (0, math.e)) - 1.0) < 1e-14
    shot = geodesic_distance_shooting((0.0, 1.0), (1.0, 1.0))
    assert abs(shot - math.acosh(1.5)) < 1e-6
    assert abs(hyperbolic_distance((0, 1), (1, 1)) - shot) < 1e-6
    assert abs(hyperbolic_distance((0, 1), (1, 1)) - 0.9624) < 1e-4


def test_hyperbolic_distance_shooting_oblique():
    p, q = (0.0, 0.5), (1.3, 2.0)
    assert abs(hyperbolic_distance(p, q) - geodesic_distance_shooting(p, q)) < 1e-6


def test_hyperbolic_distance_curvature_scaling():
    p, q = (0.0, 1.0), (2.0, 3.0)
    assert math.isclose(hyperbolic_distance(p, q, 2.0), hyperbolic_distance(p, q) / 2, rel_tol=1e-14)


def test_hyperbolic_distance_rejects_lower_half():
    with pytest.raises(DomainError):
        hyperbolic_distance((0, 0), (0, 1))
    with pytest.raises(DomainError):
        hyperbolic_distance((0, 1), (0, 2), kappa=0)


points = st.tuples(st.floats(-5, 5), st.floats(0.05, 5))


@settings(max_examples=200, deadline=None)
@given(points, points, points)
def test_hyperbolic_distance_triangle_inequality(p, q, s):
    d = hyperbolic_distance
    assert d(p, s) <= d(p, q) + d(q, s) + 1e-12
    assert d(p, q) == pytest.approx(d(q, p), abs=1e-15)


def test_max_pairwise_distance_blocks():
    rng = np.random.default_rng(3)
    pts = np.column_stack([rng.uniform(-2, 2, 1100), rng.uniform(0.1, 3, 1100)])
    brute = max(hyperbolic_distance(pts[i], pts[j]) for i in range(0, 1100, 7) for j in range(1100))
    assert max_pairwise_distance(pts) >= brute
    sub = pts[::7]
    full = np.max(hyperbolic_distance(sub[:, None, :], sub[None, :, :]))
    assert max_pairwise_distance(sub) == pytest.approx(full, rel=1e-15)
