"""Independent reference computations used by the tests.

Nothing here imports the package; each oracle reaches its value by a route
different from the implementation it checks.
"""
import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq


def rk4_sn(kappa, r, h=1e-4):
    """Integrate x'' + kappa x = 0, x(0)=0, x'(0)=1 up to r with classical RK4."""
    steps = max(1, int(round(r / h)))
    h = r / steps
    x, v = 0.0, 1.0

    def f(x, v):
        return v, -kappa * x

    for _ in range(steps):
        k1 = f(x, v)
        k2 = f(x + 0.5 * h * k1[0], v + 0.5 * h * k1[1])
        k3 = f(x + 0.5 * h * k2[0], v + 0.5 * h * k2[1])
        k4 = f(x + h * k3[0], v + h * k3[1])
        x += h / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        v += h / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return x


def coth_series(x, terms=60):
    """cosh(x)/sinh(x) from truncated Taylor sums."""
    ch = sum(x ** (2 * k) / math.factorial(2 * k) for k in range(terms))
    sh = sum(x ** (2 * k + 1) / math.factorial(2 * k + 1) for k in range(terms))
    return ch / sh


def _geodesic_rhs(t, s):
    x, y, vx, vy = s
    return [vx, vy, 2 * vx * vy / y, (vy**2 - vx**2) / y]


def shoot_halfplane(p, angle, target_x, max_len=40.0):
    """Height and arclength where the unit-speed geodesic from ``p`` at ``angle`` reaches ``target_x``.

    Integrates the Christoffel form of the geodesic equations of ``(dx^2 + dy^2)/y^2``.
    """
    event = lambda t, s: s[0] - target_x
    event.terminal, event.direction = True, 1
    s0 = [p[0], p[1], p[1] * math.cos(angle), p[1] * math.sin(angle)]
    sol = solve_ivp(_geodesic_rhs, (0.0, max_len), s0, events=event, rtol=1e-12, atol=1e-12)
    if not sol.t_events[0].size:
        return -math.inf, math.inf  # bends back before target_x: launched too low
    return sol.y_events[0][0][1], sol.t_events[0][0]


def geodesic_distance_shooting(p, q):
    """Distance in the curvature -1 half-plane by root-finding on the launch angle (needs q.x > p.x)."""
    miss = lambda a: max(shoot_halfplane(p, a, q[0])[0], 0.0) - q[1]
    lo, hi = -1.5, 1.5
    while miss(hi) < 0:
        hi = 0.5 * (hi + math.pi / 2)
    angle = brentq(miss, lo, hi, xtol=1e-14)
    return shoot_halfplane(p, angle, q[0])[1]


def bessel_j0(x, terms=80):
    return sum((-1) ** k * (x / 2) ** (2 * k) / math.factorial(k) ** 2 for k in range(terms))


def bessel_j0_first_root(tol=1e-13):
    lo, hi = 2.0, 3.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if bessel_j0(lo) * bessel_j0(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def lattice_count(lam, width=1.0, height=1.0):
    """#{(m, n) >= 1 : pi^2 (m^2/w^2 + n^2/h^2) < lam} by brute force."""
    count = 0
    m = 1
    while math.pi**2 * (m / width) ** 2 < lam:
        n = 1
        while math.pi**2 * ((m / width) ** 2 + (n / height) ** 2) < lam:
            count += 1
            n += 1
        m += 1
    return count


def lattice_spectrum(count, width=1.0, height=1.0):
    vals = []
    side = int(3 * math.sqrt(count)) + 5
    for m in range(1, side):
        for n in range(1, side):
            vals.append(math.pi**2 * ((m / width) ** 2 + (n / height) ** 2))
    return sorted(vals)[:count]


def phase_volume_c0(phi_value, width, height, samples=10_000_000, seed=0, chunk=1_000_000):
    """Monte-Carlo (2 pi)^-2 vol{(x, xi): phi |xi|^2 <= 1} for constant phi over a rectangle."""
    rng = np.random.default_rng(seed)
    R = 1.0 / math.sqrt(phi_value)
    hits = 0
    for start in range(0, samples, chunk):
        n = min(chunk, samples - start)
        xi = rng.uniform(-R, R, size=(n, 2))
        hits += int(np.count_nonzero(phi_value * np.sum(xi**2, axis=1) <= 1.0))
    vol = hits / samples * (2 * R) ** 2 * width * height
    return vol / (2 * math.pi) ** 2


def csc3_integral(a, b):
    """Exact integral of csc^3 over (a, b)."""
    F = lambda t: -0.5 / math.sin(t) / math.tan(t) + 0.5 * math.log(math.tan(t / 2))
    return F(b) - F(a)


def chain_eigenvalues(N):
    """Eigenvalues of tridiag(-1, 2, -1)/h^2 with h = 1/(N+1)."""
    h = 1.0 / (N + 1)
    k = np.arange(1, N + 1)
    return 2 / h**2 * (1 - np.cos(k * math.pi * h))
