"""Shear maps u(x) = (x1, x2 + sigma(x)) on Q = [-1, 1]^2.

det grad u = 1 + sigma_2 and |grad u|^2 = 2 + 2 sigma_2 + |grad sigma|^2, so
the energy is a scalar problem in sigma. The Lipschitz bound in x1 is
imposed by a quadratic penalty on (|sigma_1| - M)_+ and then measured.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.sparse.linalg import splu

from .elastic import CUTOFF_SLOPE, VariationSpec, cutoff
from .errors import (BoundViolated, InvalidParams, ProfileOrderViolated, TooFewRadii)
from .grid import Mesh, interpolate, stiffness_matrix
from .minimizer import Problem, SolveResult, SolveSettings, descend
from .regularity import DecayProfile, dirichlet_growth, fit_exponent, radius_ladder

E2 = np.array([0.0, 1.0])


def shear_jacobian(mesh: Mesh, sigma: np.ndarray) -> np.ndarray:
    """Full 2x2 gradient of x -> (x1, x2 + sigma) per triangle."""
    gs = mesh.gradient(sigma)
    F = np.zeros((mesh.n_triangles, 2, 2))
    F[:, 0, 0] = 1.0
    F[:, 1, :] = gs
    F[:, 1, 1] += 1.0
    return F


@dataclass(frozen=True)
class LipschitzPenalty:
    M: float
    weight: float = 1e4
    holder: float | None = None  # exponent; None keeps the Lipschitz form

    def quotient(self, mesh: Mesh, s1: np.ndarray) -> np.ndarray:
        if self.holder is None:
            return np.abs(s1)
        # horizontal edge length per triangle on the structured square
        hx = 2.0 / mesh.n
        return np.abs(s1) * hx ** (1.0 - self.holder)

    def value(self, mesh: Mesh, s1: np.ndarray) -> np.ndarray:
        return self.weight * np.maximum(self.quotient(mesh, s1) - self.M, 0.0) ** 2

    def derivative(self, mesh: Mesh, s1: np.ndarray) -> np.ndarray:
        scale = 1.0 if self.holder is None else (2.0 / mesh.n) ** (1.0 - self.holder)
        return 2.0 * self.weight * np.maximum(self.quotient(mesh, s1) - self.M, 0.0) * np.sign(s1) * scale


def shear_density(mesh: Mesh, sigma: np.ndarray, lam: float, law) -> np.ndarray:
    gs = mesh.gradient(sigma)
    return lam * (2.0 + 2.0 * gs[:, 1] + (gs * gs).sum(axis=1)) + law.eval(1.0 + gs[:, 1])


def shear_element_energy(mesh: Mesh, sigma: np.ndarray, lam: float, law,
                         penalty: LipschitzPenalty | None = None) -> np.ndarray:
    e = mesh.areas * shear_density(mesh, sigma, lam, law)
    if penalty is not None:
        e = e + mesh.areas * penalty.value(mesh, mesh.gradient(sigma)[:, 0])
    return e


def shear_energy(mesh: Mesh, sigma: np.ndarray, lam: float, law) -> float:
    e = shear_element_energy(mesh, sigma, lam, law)
    return float(np.sum(e)) if np.all(np.isfinite(e)) else math.inf


def shear_energy_delta(mesh: Mesh, sigma: np.ndarray, dsigma: np.ndarray, lam: float, law,
                       penalty: LipschitzPenalty | None = None) -> np.ndarray:
    gs = mesh.gradient(sigma)
    gd = mesh.gradient(dsigma)
    d = 1.0 + gs[:, 1]
    dens = lam * (2.0 * gd[:, 1] + (gd * (2.0 * gs + gd)).sum(axis=1)) + law.delta(d, gd[:, 1])
    if penalty is not None:
        dens = dens + penalty.value(mesh, gs[:, 0] + gd[:, 0]) - penalty.value(mesh, gs[:, 0])
    return np.where(d + gd[:, 1] > 0, mesh.areas * dens, math.inf)


def shear_gradient(mesh: Mesh, sigma: np.ndarray, lam: float, law,
                   penalty: LipschitzPenalty | None = None, project: bool = True) -> np.ndarray:
    gs = mesh.gradient(sigma)
    P = lam * (2.0 * gs + 2.0 * E2) + law.eval_prime(1.0 + gs[:, 1])[:, None] * E2
    if penalty is not None:
        P[:, 0] += penalty.derivative(mesh, gs[:, 0])
    local = mesh.areas[:, None] * np.einsum("taj,tj->ta", mesh.basis_grads, P)
    g = mesh.assemble(local)
    if project:
        g[mesh.dirichlet] = 0.0
    return g


# -- boundary data ------------------------------------------------------------

Profile = Callable[[np.ndarray], np.ndarray]

PROFILE_PRESETS: dict[str, tuple[Profile, Profile]] = {
    "zero": (lambda x: 0.0 * x, lambda x: 0.0 * x),
    "constant": (lambda x: 1.0 + 0.0 * x, lambda x: 0.0 * x),
    "abs": (np.abs, lambda x: -np.abs(x)),
    "oscillatory": (lambda x: 0.3 * np.sin(np.pi * x) + 0.5, lambda x: -0.5 + 0.0 * x),
}


def boundary_from_profiles(mesh: Mesh, phi_plus: Profile, phi_minus: Profile,
                           samples: int = 2001) -> np.ndarray:
    """sigma0 = (1 + x2)/2 phi_plus(x1) + (1 - x2)/2 phi_minus(x1)."""
    xs = np.concatenate([np.linspace(-1.0, 1.0, samples), mesh.points[:, 0]])
    gap = phi_plus(xs) - phi_minus(xs)
    if np.any(gap < 0):
        raise ProfileOrderViolated(f"phi_plus < phi_minus at x1 = {xs[np.argmin(gap)]:.6f}")
    x1, x2 = mesh.points[:, 0], mesh.points[:, 1]
    return 0.5 * (1.0 + x2) * phi_plus(x1) + 0.5 * (1.0 - x2) * phi_minus(x1)


def measured_lipschitz(mesh: Mesh, sigma: np.ndarray) -> float:
    """Largest |difference quotient| of sigma over horizontal mesh edges."""
    tri = mesh.triangles
    best = 0.0
    for a, b in ((0, 1), (1, 2), (2, 0)):
        pa, pb = mesh.points[tri[:, a]], mesh.points[tri[:, b]]
        horiz = pa[:, 1] == pb[:, 1]
        if horiz.any():
            q = np.abs(sigma[tri[horiz, b]] - sigma[tri[horiz, a]]) / np.abs(pb[horiz, 0] - pa[horiz, 0])
            best = max(best, float(q.max()))
    return best


# -- solver -------------------------------------------------------------------

@dataclass
class ShearField:
    mesh: Mesh = field(repr=False)
    sigma: np.ndarray = field(repr=False)
    M: float
    lam: float
    law: object = field(repr=False)
    measured_M: float = 0.0
    penalty_residual: float = 0.0
    solve: SolveResult | None = field(default=None, repr=False)

    @property
    def lipschitz_ok(self) -> bool:
        return self.measured_M <= self.M * (1.0 + 1e-3) + 1e-12

    @property
    def min_det(self) -> float:
        return float(1.0 + self.mesh.gradient(self.sigma)[:, 1].min())


def shear_problem(mesh: Mesh, sigma_fixed: np.ndarray, lam: float, law,
                  penalty: LipschitzPenalty | None, precondition: bool = True) -> Problem:
    free = ~mesh.dirichlet
    base = np.array(sigma_fixed, dtype=float)

    def expand(x):
        s = base.copy()
        s[free] = x
        return s

    def expand_direction(p):
        ds = np.zeros_like(base)
        ds[free] = p
        return ds

    solve = None
    if precondition and free.any():
        lu = splu((2.0 * lam * stiffness_matrix(mesh)[free][:, free]).tocsc())
        solve = lu.solve

    return Problem(
        expand, expand_direction,
        lambda s: shear_element_energy(mesh, s, lam, law, penalty),
        lambda s, ds: shear_energy_delta(mesh, s, ds, lam, law, penalty),
        lambda s: shear_gradient(mesh, s, lam, law, penalty, project=False)[free],
        lambda s: float(1.0 + mesh.gradient(s)[:, 1].min()),
        mesh.lumped_areas()[free], solve)


def minimize_shear(mesh: Mesh, sigma0: np.ndarray, M: float, lam: float, law,
                   settings: SolveSettings = SolveSettings(), penalty_weight: float = 1e4,
                   holder: float | None = None) -> ShearField:
    """Descend from sigma0 with the boundary values on ``mesh.dirichlet`` held fixed."""
    if not M >= 0:
        raise InvalidParams("M must be nonnegative")
    pen = LipschitzPenalty(M, penalty_weight, holder)
    prob = shear_problem(mesh, sigma0, lam, law, pen, settings.precondition)
    res = descend(prob, np.asarray(sigma0, float)[~mesh.dirichlet], settings)
    s1 = mesh.gradient(res.field)[:, 0]
    pen_res = float(np.max(np.maximum(np.abs(s1) - M, 0.0), initial=0.0))
    return ShearField(mesh, res.field, float(M), float(lam), law,
                      measured_lipschitz(mesh, res.field), pen_res, res)


# -- xi fields ------------------------------------------------------------------

def _xi(values, s0, CR, sign):
    excess = values - s0 - sign * CR
    return np.maximum(sign * excess, 0.0)


@dataclass
class XiFields:
    x0: tuple[float, float]
    C: float
    xi_plus: np.ndarray  # per triangle, at centroids
    xi_minus: np.ndarray
    chi_plus: np.ndarray
    chi_minus: np.ndarray
    violations_plus: int  # triangles below x0 with xi_plus > 0
    violations_minus: int  # triangles above x0 with xi_minus > 0

    def rows(self, mesh: Mesh):
        return np.column_stack([mesh.centroids, self.xi_plus, self.xi_minus])


def _relative(mesh: Mesh, sigma: np.ndarray, x0: np.ndarray) -> tuple[np.ndarray, float]:
    """sigma minus its value at one vertex of the triangle holding x0, and sigma(x0)
    in the same frame. Working with differences keeps exact vertical shifts exact."""
    tri, lam = mesh.locate(x0[None])
    verts = mesh.triangles[tri[0]]
    ds = np.asarray(sigma, float) - float(sigma[verts[0]])
    return ds, float(lam[0] @ ds[verts])


def xi_fields(mesh: Mesh, sigma: np.ndarray, x0, M: float, tol: float = 1e-12) -> XiFields:
    x0 = np.asarray(x0, float)
    C = 1.0 + M
    ds, s0 = _relative(mesh, sigma, x0)
    sc = mesh.centroid_values(ds)
    d = mesh.centroids - x0
    R = np.hypot(d[:, 0], d[:, 1])
    xp = _xi(sc, s0, C * R, +1)
    xm = _xi(sc, s0, C * R, -1)
    scale = tol * max(1.0, float(np.abs(sigma).max()))
    below = d[:, 1] < 0
    above = d[:, 1] > 0
    return XiFields((float(x0[0]), float(x0[1])), C, xp, xm, xp > 0, xm > 0,
                    int(np.sum(below & (xp > scale))), int(np.sum(above & (xm > scale))))


def nodal_xi(mesh: Mesh, sigma: np.ndarray, x0, C: float, sign: int) -> np.ndarray:
    x0 = np.asarray(x0, float)
    ds, s0 = _relative(mesh, sigma, x0)
    R = np.hypot(*(mesh.points - x0).T)
    return _xi(ds, s0, C * R, sign)


@dataclass
class ShearBoundsReport:
    sign: int
    eps: float
    C: float
    C_prime: float
    lower_margin: float  # min(det_eps - det/2) / scale
    upper_margin: float  # min(det + C'|eps| - det_eps) / scale
    expansion_residual: float
    scale: float


def build_shear_variation(mesh: Mesh, sigma: np.ndarray, spec: VariationSpec, sign: int,
                          M: float, tol: float = 1e-9) -> tuple[np.ndarray, ShearBoundsReport]:
    """sigma + eps eta^2 xi_sign with nodal xi, and the determinant bounds

        det/2 <= det_eps <= det + C' |eps|,
        C' = 1 + C + 2 (c / r) sup_{B(x0, 2r)} |sigma - sigma(x0) -+ C R|,

    where c = sup |f'| r of the cutoff.
    """
    if sign not in (1, -1):
        raise InvalidParams("sign must be +1 or -1")
    spec.validate(mesh)
    if not -0.5 < spec.eps <= 0:
        raise InvalidParams("need -1/2 < eps <= 0")
    x0 = np.asarray(spec.x0, float)
    C = 1.0 + M
    xi = nodal_xi(mesh, sigma, x0, C, sign)
    Rn = np.hypot(*(mesh.points - x0).T)
    eta2 = cutoff(Rn, spec.r) ** 2
    incr = eta2 * xi
    sig_eps = sigma + spec.eps * incr
    det = 1.0 + mesh.gradient(sigma)[:, 1]
    det_eps = 1.0 + mesh.gradient(sig_eps)[:, 1]
    expansion = det + spec.eps * mesh.gradient(incr)[:, 1]
    s0 = float(interpolate(mesh, sigma, x0))
    ball = Rn < 2 * spec.r
    sup = float(np.max(np.abs(sigma[ball] - s0 - sign * C * Rn[ball]), initial=0.0))
    Cp = 1.0 + C + 2.0 * CUTOFF_SLOPE / spec.r * sup
    scale = float(np.max(np.abs(det)))
    low = (det_eps - det / 2.0) / scale
    up = (det + Cp * abs(spec.eps) - det_eps) / scale
    rep = ShearBoundsReport(sign, spec.eps, C, Cp, float(low.min()), float(up.min()),
                            float(np.max(np.abs(det_eps - expansion))), scale)
    if rep.lower_margin < -tol or rep.upper_margin < -tol:
        worst = int(np.argmin(np.minimum(low, up)))
        raise BoundViolated(f"shear determinant bounds fail on triangle {worst}",
                            element=worst, margin=min(rep.lower_margin, rep.upper_margin))
    return sig_eps, rep


SHEAR_EPS_LADDER = (-1e-2, -1e-3, -1e-4)


def shear_inequality_probe(mesh: Mesh, sigma: np.ndarray, x0, r: float, lam: float, law,
                           M: float, eps_ladder=SHEAR_EPS_LADDER, slope_tol: float = 1e-5) -> dict:
    """Both sides of the first-variation inequality for the two xi variations,
    plus the one-sided quotients (E(sigma_eps) - E(sigma)) / eps.

    The left side is half the derivative of the Dirichlet part along
    eta^2 xi; for the minus sign the chi terms enter with a minus sign
    because grad xi_minus = -(grad sigma + C grad R) on its support.
    """
    spec = VariationSpec(tuple(map(float, x0)), r, 0.0)
    spec.validate(mesh)
    x0 = np.asarray(x0, float)
    C = 1.0 + M
    s0 = float(interpolate(mesh, sigma, x0))
    Rn = np.hypot(*(mesh.points - x0).T)
    eta2_n = cutoff(Rn, r) ** 2
    eta2 = eta2_n[mesh.triangles].mean(axis=1)
    g_eta2 = mesh.gradient(eta2_n)
    gs = mesh.gradient(sigma)
    d = mesh.centroids - x0
    Rc = np.hypot(d[:, 0], d[:, 1])
    with np.errstate(invalid="ignore", divide="ignore"):
        gR = np.where(Rc[:, None] > 0, d / Rc[:, None], 0.0)
    sc = mesh.centroid_values(sigma)
    det = 1.0 + gs[:, 1]
    hp = law.eval_prime(det)
    out = {}
    for sign, tag in ((1, "plus"), (-1, "minus")):
        xi = _xi(sc, s0, C * Rc, sign)
        chi = xi > 0
        a = (g_eta2[:, 1] + (gs * g_eta2).sum(axis=1)) * xi
        b = eta2 * ((gs[:, 1] - sign * C * gR[:, 1]) + (gs * (gs - sign * C * gR)).sum(axis=1)) * chi
        lhs = lam * float(np.dot(mesh.areas, a + sign * b))
        big = det > 1.0
        rhs_d = 0.5 * np.abs(hp) * (np.hypot(g_eta2[:, 0], g_eta2[:, 1]) * xi + C * eta2) * chi * big
        rhs = float(np.dot(mesh.areas, rhs_d))
        v = eta2_n * nodal_xi(mesh, sigma, x0, C, sign)
        slopes = {}
        for eps in eps_ladder:
            de = shear_energy_delta(mesh, sigma, eps * v, lam, law)
            slopes[float(eps)] = math.fsum(de) / eps
        out[tag] = {"lhs": lhs, "rhs": rhs, "slopes": slopes,
                    "max_slope": max(slopes.values()),
                    "slopes_ok": max(slopes.values()) <= slope_tol}
    return out


# -- Holder diagnostics ---------------------------------------------------------

@dataclass
class XiHolder:
    x0: tuple[float, float]
    plus: DecayProfile | None
    minus: DecayProfile | None
    sigma_profile: DecayProfile | None
    alpha_osc: float | None
    reconstruction_ok: bool
    notes: list[str]

    @property
    def alpha(self) -> float | None:
        """Smallest fitted exponent among the xi profiles. When both xi vanish
        near x0 the oscillation exponent of sigma stands in."""
        fits = [p.alpha for p in (self.plus, self.minus) if p is not None]
        if fits:
            return min(fits)
        return self.alpha_osc


def xi_holder_diagnostics(mesh: Mesh, sigma: np.ndarray, centers, M: float,
                          r_max: float, floor_factor: float = 2.0) -> list[XiHolder]:
    """Dirichlet growth of grad xi_plus and grad xi_minus at each centre, the
    oscillation exponent of sigma, and the case check
    |sigma(x) - sigma(x0)| <= C R + xi_plus(x) + xi_minus(x) on nodes of B(x0, r_max)."""
    C = 1.0 + M
    radii = radius_ladder(mesh, r_max, floor_factor=floor_factor)
    out = []
    for x0 in centers:
        x0 = np.asarray(x0, float)
        notes = []
        profiles = {}
        for sign, tag in ((1, "plus"), (-1, "minus"), (0, "sigma")):
            if sign:
                f = nodal_xi(mesh, sigma, x0, C, sign)
            else:
                f = np.asarray(sigma, float)
            G = mesh.gradient(f)
            try:
                profiles[tag] = dirichlet_growth(mesh, f, x0, r_max, density=(G * G).sum(axis=1),
                                                 floor_factor=floor_factor)
            except TooFewRadii as exc:
                profiles[tag] = None
                notes.append(f"{tag}: {exc}")
        s0 = float(interpolate(mesh, sigma, x0))
        Rn = np.hypot(*(mesh.points - x0).T)
        osc = np.array([np.abs(sigma[Rn <= r] - s0).max(initial=0.0) for r in radii])
        alpha_osc = fit_exponent(radii, osc)[0] if len(radii) >= 3 and np.all(osc > 0) else None
        ball = Rn <= r_max
        xp = nodal_xi(mesh, sigma, x0, C, 1)[ball]
        xm = nodal_xi(mesh, sigma, x0, C, -1)[ball]
        recon = bool(np.all(np.abs(sigma[ball] - s0) <= C * Rn[ball] + xp + xm + 1e-12))
        out.append(XiHolder((float(x0[0]), float(x0[1])), profiles["plus"], profiles["minus"],
                            profiles["sigma"], alpha_osc, recon, notes))
    return out
