"""Dirichlet growth, hole-filling ratios, the dyadic growth lemma and an
annulus Poincare inequality.

Ball membership is decided by triangle centroids throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import HypothesisViolated, InvalidParams, TooFewRadii
from .grid import Mesh, interpolate


def _dirichlet_density(mesh: Mesh, u: np.ndarray) -> np.ndarray:
    G = mesh.gradient(u)
    if G.ndim == 2:
        return (G * G).sum(axis=1)
    return (G * G).sum(axis=(1, 2))


def _centroid_radius(mesh: Mesh, x0) -> np.ndarray:
    d = mesh.centroids - np.asarray(x0, dtype=float)
    return np.hypot(d[:, 0], d[:, 1])


def _require_ball(mesh: Mesh, x0, radius: float) -> None:
    if not radius > 0:
        raise InvalidParams("radius must be positive")
    if mesh.dist_to_boundary(np.asarray(x0, float)[None])[0] < radius - 1e-14:
        raise InvalidParams(f"B(x0, {radius}) leaves the domain")


@dataclass
class DecayProfile:
    x0: tuple[float, float]
    radii: np.ndarray
    phi: np.ndarray
    alpha: float | None
    residual: float | None
    note: str = ""

    def rows(self):
        return np.column_stack([self.radii, self.phi])


def fit_exponent(radii, values) -> tuple[float, float]:
    """Least-squares slope of log(values) against log(radii) and the rms residual."""
    x = np.log(np.asarray(radii, float))
    y = np.log(np.asarray(values, float))
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(res**2)))


def radius_ladder(mesh: Mesh, r_max: float, shift: float = 0.0, floor_factor: float = 4.0) -> np.ndarray:
    """r_k = r_max 2^-(k + shift) down to ``floor_factor`` mesh sizes."""
    floor = floor_factor * mesh.h
    radii = []
    k = 0
    while True:
        r = r_max * 2.0 ** (-(k + shift))
        if r < floor:
            break
        radii.append(r)
        k += 1
    return np.array(radii[::-1])


def dirichlet_growth(mesh: Mesh, u: np.ndarray, x0, r_max: float, shift: float = 0.0,
                     density: np.ndarray | None = None, floor_factor: float = 4.0) -> DecayProfile:
    """phi(r) = integral of |grad u|^2 over B(x0, r) on a dyadic ladder, with the
    fitted exponent of phi ~ r^alpha.

    ``density`` overrides |grad u|^2 per triangle (used for derived fields).
    """
    _require_ball(mesh, x0, r_max)
    dens = _dirichlet_density(mesh, u) if density is None else np.asarray(density, float)
    w = mesh.areas * dens
    Rc = _centroid_radius(mesh, x0)
    radii = radius_ladder(mesh, r_max, shift, floor_factor)
    order = np.argsort(Rc, kind="stable")
    csum = np.concatenate([[0.0], np.cumsum(w[order])])
    phi = csum[np.searchsorted(Rc[order], radii, side="left")]
    x0t = tuple(map(float, x0))
    usable = phi > 0
    if usable.sum() < 3:
        raise TooFewRadii(f"only {int(usable.sum())} radii with positive phi")
    alpha, res = fit_exponent(radii[usable], phi[usable])
    return DecayProfile(x0t, radii, phi, alpha, res)


@dataclass
class CaccioppoliReport:
    x0: tuple[float, float]
    r: float
    d_in: float
    d_ann: float
    ratio: float  # smallest C' with d_in <= C' r^2 + C' d_ann


def caccioppoli_ratio(mesh: Mesh, u: np.ndarray, x0, r: float) -> CaccioppoliReport:
    _require_ball(mesh, x0, 2 * r)
    w = mesh.areas * _dirichlet_density(mesh, u)
    Rc = _centroid_radius(mesh, x0)
    d_in = float(np.sum(w[Rc < r]))
    d_ann = float(np.sum(w[(Rc >= r) & (Rc < 2 * r)]))
    return CaccioppoliReport(tuple(map(float, x0)), float(r), d_in, d_ann, d_in / (r * r + d_ann))


# -- growth lemma -----------------------------------------------------------

@dataclass
class GrowthLemmaCase:
    c: float
    mu: float
    p: float
    r1: float
    phi: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    name: str = "custom"

    def __post_init__(self):
        if not (0 < self.mu < 1 and self.p >= 1 and self.r1 > 0 and self.c >= 0):
            raise InvalidParams("need c >= 0, 0 < mu < 1, p >= 1 and r1 > 0")


def power_case(mu: float, p: float, r1: float = 1.0) -> GrowthLemmaCase:
    """phi(r) = r^p with the smallest c for which r^p <= c r^p + mu (2r)^p."""
    c = max(0.0, 1.0 - mu * 2.0**p)
    return GrowthLemmaCase(c, mu, p, r1, lambda r: np.asarray(r, float) ** p, f"power(mu={mu},p={p})")


def recursive_case(mu: float, p: float, c: float = 1.0, r1: float = 1.0,
                   levels: int = 60, phi1: float | None = None) -> GrowthLemmaCase:
    """phi built by phi(r) = c r^p + mu phi(2r) on dyadic radii, extended as a
    step function between them.

    The sequence is nondecreasing in r exactly when
    phi(r1) >= c (r1/2)^p / (1 - mu); the default start is the larger of
    that threshold and 1.
    """
    if phi1 is None:
        phi1 = max(1.0, c * (r1 / 2.0) ** p / (1.0 - mu))
    vals = [float(phi1)]
    for k in range(1, levels + 1):
        r = r1 * 2.0**-k
        vals.append(c * r**p + mu * vals[-1])
    vals = np.array(vals)  # vals[k] = phi(r1 2^-k)

    def phi(r):
        r = np.asarray(r, float)
        # smallest dyadic radius >= r
        k = np.floor(np.log2(r1 / r) + 1e-12).astype(int)
        return vals[np.clip(k, 0, levels)]

    return GrowthLemmaCase(c, mu, p, r1, phi, f"recursive(mu={mu},p={p})")


@dataclass
class GrowthLemmaReport:
    alpha_prime: float
    c_tilde: float
    radii: np.ndarray
    phi: np.ndarray
    bound: np.ndarray
    min_slack: float
    decay_exponent: float
    guaranteed_exponent: float


def growth_constant(c: float, mu: float, p: float, r1: float) -> float:
    """c~ in phi(r) <= c~ max(r^{p/2}, r^{a'/2}) + 2^{a'} (r/r1)^{a'} phi(r1)."""
    ap = math.log2(1.0 / mu)
    return c / (1.0 - mu) * ((2.0 * r1) ** (p / 2.0) + (r1 / 2.0) ** p * r1 ** (-ap / 2.0))


def growth_lemma_check(case: GrowthLemmaCase, levels: int = 40) -> GrowthLemmaReport:
    """Verify the iteration hypothesis and the explicit decay bound on r1 2^-k."""
    c, mu, p, r1 = case.c, case.mu, case.p, case.r1
    ap = math.log2(1.0 / mu)
    k = np.arange(1, levels + 1)
    r = r1 * 2.0**-k
    phi = case.phi(r)
    lhs_ok = phi <= c * r**p + mu * case.phi(2 * r) + 1e-14 * np.abs(phi)
    if not np.all(lhs_ok):
        raise HypothesisViolated(f"iteration hypothesis fails at r = {r[~lhs_ok][0]:.3e}")
    if np.any(np.diff(phi) > 0):
        raise HypothesisViolated("phi is not nondecreasing on the dyadic grid")
    ct = growth_constant(c, mu, p, r1)
    phi1 = float(case.phi(np.array([r1]))[0])
    bound = ct * np.maximum(r ** (p / 2.0), r ** (ap / 2.0)) + 2.0**ap * (r / r1) ** ap * phi1
    slack = bound - phi
    tail = slice(levels // 2, None)
    decay, _ = fit_exponent(r[tail], phi[tail])
    return GrowthLemmaReport(ap, ct, r, phi, bound, float(slack.min()), decay, min(p / 2.0, ap / 2.0))


# -- Poincare on an annulus -------------------------------------------------

@dataclass
class PoincareReport:
    x0: tuple[float, float]
    r: float
    lhs: float  # integral over the annulus of |u - u(x0)|^2
    rhs: float  # (7 r^2 / 3) times the annulus Dirichlet energy
    weighted_rhs: float  # (7 r^3 / 3) times the integral over B(x0, 2r) of |grad u|^2 / |x - x0|
    slack: float  # relative slack allowed for the mesh

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs * (1.0 + self.slack)

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else (0.0 if self.lhs == 0 else math.inf)


def poincare_annulus_check(mesh: Mesh, u: np.ndarray, x0, r: float, slack: float = 0.10) -> PoincareReport:
    """Both sides of the annulus inequality with exact P1 quadrature of |u - u(x0)|^2.

    ``weighted_rhs`` is the radially weighted bound whose integration region
    is the whole ball; the annulus-only form can fail when u varies inside
    B(x0, r) but not on the annulus.
    """
    _require_ball(mesh, x0, 2 * r)
    u = np.asarray(u, float)
    a = interpolate(mesh, u, np.asarray(x0, float))
    Rc = _centroid_radius(mesh, x0)
    ann = (Rc >= r) & (Rc < 2 * r)
    v = (u - a)[mesh.triangles[ann]]
    if v.ndim == 2:
        v = v[..., None]
    # exact for P1: int_T v^2 = |T|/12 (sum v_i^2 + (sum v_i)^2)
    quad = (v**2).sum(axis=1) + v.sum(axis=1) ** 2
    lhs = float(np.sum(mesh.areas[ann] / 12.0 * quad.sum(axis=1)))
    dens = _dirichlet_density(mesh, u)
    rhs = 7.0 * r * r / 3.0 * float(np.sum(mesh.areas[ann] * dens[ann]))
    ball = Rc < 2 * r
    weighted = 7.0 * r**3 / 3.0 * float(np.sum(mesh.areas[ball] * dens[ball] / Rc[ball]))
    return PoincareReport(tuple(map(float, x0)), float(r), lhs, rhs, weighted, slack)


def random_field(points: np.ndarray, rng: np.random.Generator, modes: int = 8,
                 max_freq: float = 3.0) -> np.ndarray:
    """Smooth random scalar field: a sum of plane waves with gaussian amplitudes."""
    k = rng.uniform(-max_freq, max_freq, size=(modes, 2)) * np.pi
    phase = rng.uniform(0.0, 2.0 * np.pi, size=modes)
    amp = rng.normal(size=modes) / np.sqrt(modes)
    return np.cos(points @ k.T + phase) @ amp
