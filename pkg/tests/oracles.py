"""Reference computations that do not go through the package's P1 machinery."""
from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq


# -- radial maps u(x) = rho(|x|) x / |x| on the unit disc -------------------------

def _radial_rhs(law, lam):
    def rhs(r, y):
        rho, rp = y
        d = rho * rp / r
        h2 = float(law.eval_second(d))
        num = 2 * lam * rho / r - 2 * lam * rp - h2 * rho * rp**2 / r + h2 * rho**2 * rp / r**2
        return [rp, num / (2 * lam * r + h2 * rho**2 / r)]
    return rhs


def shoot_radial(law, lam: float, rho_end: float, r0: float = 1e-6):
    """Euler-Lagrange ODE for radial maps, shooting on rho'(0) so that rho(1) = rho_end.

    Returns (slope at 0, dense solution)."""
    rhs = _radial_rhs(law, lam)

    def end(k):
        sol = solve_ivp(rhs, (r0, 1.0), [k * r0, k], rtol=1e-11, atol=1e-13, dense_output=True)
        return sol.y[0, -1] - rho_end, sol

    lo, hi = 0.2 * rho_end, 3.0 * rho_end
    k = brentq(lambda s: end(s)[0], lo, hi, xtol=1e-14)
    return k, end(k)[1]


def radial_energy(law, lam: float, rho, rho_prime) -> float:
    """2 pi int_0^1 (lam (rho'^2 + rho^2 / r^2) + h(rho rho' / r)) r dr."""
    def f(r):
        a, b = rho(r), rho_prime(r)
        return (lam * (b * b + a * a / (r * r)) + float(law.eval(a * b / r))) * r
    val, _ = quad(f, 1e-9, 1.0, limit=200, epsabs=1e-12, epsrel=1e-12)
    return 2 * math.pi * val


def radial_oracle_energy(law, lam: float, rho_end: float) -> float:
    k, sol = shoot_radial(law, lam, rho_end)

    def rho(r):
        return k * r if r < 1e-6 else float(sol.sol(r)[0])

    def rho_prime(r):
        return k if r < 1e-6 else float(sol.sol(r)[1])

    return radial_energy(law, lam, rho, rho_prime)


# -- star-shapedness by counting ray crossings -----------------------------------

def ray_crossings(poly: np.ndarray, angle: float) -> int:
    """Number of polygon edges hit by the ray from the origin at ``angle``."""
    d = np.array([math.cos(angle), math.sin(angle)])
    a, b = poly[:-1], poly[1:]
    e = b - a
    den = d[0] * e[:, 1] - d[1] * e[:, 0]
    ok = np.abs(den) > 1e-15
    # solve t d = a + s e
    t = (a[:, 0] * e[:, 1] - a[:, 1] * e[:, 0])[ok] / den[ok]
    s = (a[:, 0] * d[1] - a[:, 1] * d[0])[ok] / den[ok]
    return int(np.sum((t > 0) & (s >= 0) & (s < 1)))


def star_by_rays(poly: np.ndarray, n_rays: int = 720) -> bool:
    """Every ray from the origin meets the closed polygon exactly once."""
    offs = 0.5 * 2 * math.pi / n_rays + 1e-7  # avoid rays through vertices of regular samples
    return all(ray_crossings(poly, offs + 2 * math.pi * k / n_rays) == 1 for k in range(n_rays))


# -- closed-form integrals --------------------------------------------------------

def power_map_phi(beta: float, r):
    """int_{B_r} |grad u|^2 for u = |x|^(beta - 1) x: |grad u|^2 = (1 + beta^2) |x|^(2 beta - 2)."""
    return math.pi * (1 + beta * beta) / beta * np.asarray(r, float) ** (2 * beta)


def identity_annulus_lhs(r: float) -> float:
    """int over r < |x| < 2r of |x|^2."""
    return 2 * math.pi * ((2 * r) ** 4 - r**4) / 4


def identity_annulus_rhs(r: float) -> float:
    return 7 * r * r / 3 * 2 * (math.pi * (2 * r) ** 2 - math.pi * r * r)


def growth_bound(c: float, mu: float, p: float, r1: float, r, phi_r1: float):
    """Explicit decay bound assembled term by term from the two geometric sums."""
    ap = -math.log(mu) / math.log(2)
    r = np.asarray(r, float)
    first = c * (2 * r1) ** (p / 2) / (1 - mu)
    second = c * (r1 / 2) ** p / (1 - mu) * r1 ** (-ap / 2)
    return (first + second) * np.maximum(r ** (p / 2), r ** (ap / 2)) + 2**ap * (r / r1) ** ap * phi_r1


def law_moment_integrals(law) -> dict:
    """Quadrature of h'' and h' across the cubic branches."""
    c1, c2 = law.c1, law.c2
    q = dict(epsabs=1e-13, epsrel=1e-13, limit=200)
    return {
        "dh_left": quad(lambda s: float(law.eval_second(s)), c1, 1.0, **q)[0],
        "dh_right": quad(lambda s: float(law.eval_second(s)), 1.0, c2, **q)[0],
        "h_left": quad(lambda s: float(law.eval_prime(s)), c1, 1.0, **q)[0],
        "h_right": quad(lambda s: float(law.eval_prime(s)), 1.0, c2, **q)[0],
    }
