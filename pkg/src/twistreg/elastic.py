"""Elastic energy E(u) = sum_T |T| (lam |grad u|^2 + h(det grad u)), its nodal
gradient, and radial outer variations u + eps eta^2 (u - u(x0))."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BoundViolated, InfeasibleState, InvalidParams
from .grid import Mesh, adjugate, det2, element_state, interpolate
from .twist import sign_tol, twist_field

CUTOFF_SLOPE = 1.5  # sup |f'| * r for the smoothstep cutoff


@dataclass(frozen=True)
class EnergyConfig:
    lam: float
    law: object  # anything with eval / eval_prime on arrays

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidParams("lambda must be positive")


def element_energy(mesh: Mesh, u: np.ndarray, config: EnergyConfig) -> np.ndarray:
    """Per-triangle energy; +inf on triangles with det <= 0."""
    F = mesh.gradient(u)
    d = det2(F)
    dens = config.lam * (F * F).sum(axis=(1, 2)) + config.law.eval(d)
    return mesh.areas * dens


def element_energy_delta(mesh: Mesh, u: np.ndarray, du: np.ndarray,
                         config: EnergyConfig) -> np.ndarray:
    """Per-triangle E(u + du) - E(u), formed from the increment so that small
    changes keep their relative accuracy. Infinite where u + du folds."""
    F = mesh.gradient(u)
    D = mesh.gradient(du)
    d = det2(F)
    # det(F + D) = det F + cof F : D + det D
    dd = (F[:, 1, 1] * D[:, 0, 0] - F[:, 1, 0] * D[:, 0, 1]
          - F[:, 0, 1] * D[:, 1, 0] + F[:, 0, 0] * D[:, 1, 1]) + det2(D)
    dens = config.lam * (D * (2.0 * F + D)).sum(axis=(1, 2)) + config.law.delta(d, dd)
    dens = np.where(d + dd > 0, dens, math.inf)
    return mesh.areas * dens


def energy(mesh: Mesh, u: np.ndarray, config: EnergyConfig) -> float:
    e = element_energy(mesh, u, config)
    if not np.all(np.isfinite(e)):
        return math.inf
    return float(np.sum(e))


def energy_gradient(mesh: Mesh, u: np.ndarray, config: EnergyConfig,
                    project: bool = True) -> np.ndarray:
    """Nodal gradient (N, 2); Dirichlet rows zeroed when ``project``."""
    F = mesh.gradient(u)
    d = det2(F)
    if np.any(d <= 0):
        raise InfeasibleState(f"{int(np.sum(d <= 0))} triangles with det <= 0")
    # d det / dF = cof F = adj(F)^T
    P = 2.0 * config.lam * F + config.law.eval_prime(d)[:, None, None] * np.swapaxes(adjugate(F), 1, 2)
    local = mesh.areas[:, None, None] * np.matmul(mesh.basis_grads, np.swapaxes(P, 1, 2))
    grad = mesh.assemble(local)
    if project:
        grad[mesh.dirichlet] = 0.0
    return grad


# -- cutoff and variations ------------------------------------------------

def cutoff(R, r: float):
    """1 on [0, r], 0 beyond 2r, cubic smoothstep in between."""
    s = np.clip((np.asarray(R, dtype=float) - r) / r, 0.0, 1.0)
    return 1.0 - 3.0 * s**2 + 2.0 * s**3


def cutoff_prime(R, r: float):
    s = np.clip((np.asarray(R, dtype=float) - r) / r, 0.0, 1.0)
    return (-6.0 * s + 6.0 * s**2) / r


@dataclass(frozen=True)
class VariationSpec:
    x0: tuple[float, float]
    r: float
    eps: float

    def validate(self, mesh: Mesh) -> None:
        if not self.r > 0:
            raise InvalidParams("inner radius must be positive")
        if not math.isfinite(self.eps):
            raise InvalidParams("eps must be finite")
        if not 2.0 * self.r < mesh.dist_to_boundary(np.asarray(self.x0, float)[None])[0]:
            raise InvalidParams("B(x0, 2r) must lie inside the domain")


def _radial(mesh: Mesh, x0, pts=None):
    pts = mesh.points if pts is None else pts
    d = pts - np.asarray(x0, dtype=float)
    return np.hypot(d[:, 0], d[:, 1])


def build_variation(mesh: Mesh, u: np.ndarray, spec: VariationSpec) -> np.ndarray:
    spec.validate(mesh)
    a = interpolate(mesh, u, np.asarray(spec.x0, float))
    eta = cutoff(_radial(mesh, spec.x0), spec.r)
    return u + spec.eps * (eta**2)[:, None] * (u - a)


def _element_cutoff(mesh: Mesh, spec: VariationSpec):
    """Element-averaged eta and f'(R) at the centroid."""
    eta_n = cutoff(_radial(mesh, spec.x0), spec.r)
    eta_e = eta_n[mesh.triangles].mean(axis=1)
    Rc = _radial(mesh, spec.x0, mesh.centroids)
    return eta_n, eta_e, cutoff_prime(Rc, spec.r), Rc


@dataclass
class BoundsReport:
    eps: float
    plateau_residual: float  # max |det u_eps - predicted| where eta = 1 on the triangle
    far_residual: float  # same where eta = 0 on the triangle
    annulus_residual: float  # discretisation error of the expansion on the ramp
    lower_margin: float  # min (det u_eps - det u / 4) / scale
    upper_margin: float  # min (det u - det u_eps) / scale; diagnostic only
    worst_element: int
    scale: float
    min_twist: float


def check_variation_bounds(mesh: Mesh, u: np.ndarray, spec: VariationSpec,
                           tol: float = 1e-9) -> BoundsReport:
    """Check the determinant expansion of the variation and det u_eps >= det u / 4.

    The expansion is
        det u_eps = (1 + eps eta^2)^2 det u + 2 eps f'(R) eta (1 + eps eta^2) t.
    Only the lower bound is enforced; ``upper_margin`` records how far
    det u_eps exceeds det u on the ramp, where it generally does.
    """
    spec.validate(mesh)
    if not -0.5 < spec.eps <= 0:
        raise InvalidParams("need -1/2 < eps <= 0")
    ue = build_variation(mesh, u, spec)
    d = element_state(mesh, u).det
    de = element_state(mesh, ue).det
    eta_n, eta_e, fp, Rc = _element_cutoff(mesh, spec)
    t = twist_field(mesh, u, spec.x0)
    t_ball = t[Rc < 2 * spec.r]
    ball = Rc < 2 * spec.r
    min_twist = float(np.nanmin(t_ball)) if t_ball.size else 0.0
    if min_twist < -sign_tol(t_ball):
        raise InvalidParams("twist is negative inside B(x0, 2r)")
    k = 1.0 + spec.eps * eta_e**2
    pred = k**2 * d + 2.0 * spec.eps * fp * eta_e * k * np.nan_to_num(t)
    res = np.abs(de - pred)
    eta_tri = eta_n[mesh.triangles]
    plateau = np.all(eta_tri == 1.0, axis=1)
    far = np.all(eta_tri == 0.0, axis=1)
    ramp = ~(plateau | far)
    scale = float(np.max(np.abs(d[ball]))) if ball.any() else 1.0
    low = (de - d / 4.0) / scale
    up = (d - de) / scale
    worst = int(np.argmin(low))
    rep = BoundsReport(
        eps=spec.eps,
        plateau_residual=float(res[plateau].max(initial=0.0)),
        far_residual=float(res[far].max(initial=0.0)),
        annulus_residual=float(res[ramp].max(initial=0.0)),
        lower_margin=float(low[worst]),
        upper_margin=float(up.min()),
        worst_element=worst,
        scale=scale,
        min_twist=min_twist,
    )
    if rep.lower_margin < -tol:
        raise BoundViolated(f"det u_eps < det u / 4 on triangle {worst}",
                            element=worst, margin=rep.lower_margin)
    return rep


DEFAULT_EPS_LADDER = (-1e-2, -1e-3, -1e-4)


@dataclass
class ProbeReport:
    x0: tuple[float, float]
    lhs: float
    rhs: float
    slopes: dict[float, float]
    min_det_margin: float
    min_twist: float
    twist_nonnegative: bool
    slope_tol: float

    @property
    def inequality_holds(self) -> bool:
        return self.lhs <= self.rhs

    @property
    def max_slope(self) -> float:
        return max(self.slopes.values())

    @property
    def slopes_ok(self) -> bool:
        return self.max_slope <= self.slope_tol

    def as_dict(self) -> dict:
        out = {"lhs": self.lhs, "rhs": self.rhs}
        for e, s in self.slopes.items():
            out[f"slope_eps_{e:.0e}"] = s
        out["min_det_margin"] = self.min_det_margin
        return out


def variational_inequality_probe(mesh: Mesh, u: np.ndarray, spec: VariationSpec,
                                 config: EnergyConfig, eps_ladder=DEFAULT_EPS_LADDER,
                                 slope_tol: float = 1e-5) -> ProbeReport:
    """Evaluate both sides of the first-variation inequality and the one-sided
    difference quotients (E(u_eps) - E(u)) / eps.

    ``spec.eps`` is ignored; the ladder supplies the amplitudes.
    """
    spec.validate(mesh)
    a = interpolate(mesh, u, np.asarray(spec.x0, float))
    F = mesh.gradient(u)
    d = det2(F)
    eta_n, eta_e, fp, Rc = _element_cutoff(mesh, spec)
    grad_eta2 = mesh.gradient(eta_n**2)
    w = mesh.centroid_values(u) - a
    lhs_dens = eta_e**2 * np.einsum("tij,tij->t", F, F) + np.einsum("tij,ti,tj->t", F, w, grad_eta2)
    lhs = config.lam * float(np.dot(mesh.areas, lhs_dens))
    t = np.nan_to_num(twist_field(mesh, u, spec.x0))
    hp = config.law.eval_prime(d)
    low = d < 1.0
    rhs_dens = np.where(low, eta_e**2 * np.abs(hp) * d, eta_e * t * hp * np.abs(fp))
    rhs = float(np.dot(mesh.areas, rhs_dens))

    v = (eta_n**2)[:, None] * (u - a)
    slopes = {}
    min_margin = math.inf
    for eps in eps_ladder:
        slopes[float(eps)] = math.fsum(element_energy_delta(mesh, u, eps * v, config)) / eps
        de = det2(mesh.gradient(u + eps * v))
        min_margin = min(min_margin, float(np.min(de - d / 4.0)))
    ball = Rc < 2 * spec.r
    tb = twist_field(mesh, u, spec.x0)[ball]
    min_twist = float(np.nanmin(tb)) if tb.size else 0.0
    return ProbeReport(tuple(map(float, spec.x0)), lhs, rhs, slopes, min_margin, min_twist,
                       bool(min_twist >= -sign_tol(tb)), slope_tol)
