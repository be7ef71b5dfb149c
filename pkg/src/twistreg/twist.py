"""Twist field, twist penalty and star-shapedness of circle images.

For a centre x0 and a = u(x0) the twist at x is

    t(x) = adj(grad u(x)) (u(x) - a) . (x - x0) / |x - x0|.

Along a circle |x - x0| = R with image w(theta) = rho e^{i sigma} one has
t = rho^2 sigma' / R, so nonnegative twist on the circle is the same as a
nondecreasing polar angle of the image curve.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import InvalidParams, OriginOnCurve, OutOfDomain, UnwrapAmbiguous
from .grid import Mesh, element_state, interpolate


def g(s):
    """Negative part, max(-s, 0)."""
    return np.maximum(-np.asarray(s, dtype=float), 0.0)


def twist_field(mesh: Mesh, u: np.ndarray, x0) -> np.ndarray:
    """Per-triangle twist sampled at centroids.

    Triangles whose centroid coincides with ``x0`` get NaN. Values of u
    enter only through differences to one vertex of the triangle holding
    x0, so exact shifts of u leave t bitwise unchanged.
    """
    x0 = np.asarray(x0, dtype=float)
    if not mesh.contains(x0[None])[0]:
        raise OutOfDomain(f"centre {x0} is outside the domain")
    tri, lam = mesh.locate(x0[None])
    verts = mesh.triangles[tri[0]]
    u = np.asarray(u, dtype=float)
    du = u - u[verts[0]]
    a = lam[0] @ du[verts]
    st = element_state(mesh, u)
    uc = mesh.centroid_values(du) - a
    d = mesh.centroids - x0
    R = np.hypot(d[:, 0], d[:, 1])
    v = np.einsum("tij,tj->ti", st.adj, uc)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = (v[:, 0] * d[:, 0] + v[:, 1] * d[:, 1]) / R
    t[R <= 1e-14] = np.nan
    return t


def fold_map(points: np.ndarray, depth: float = 1.5, width: float = 8.0) -> np.ndarray:
    """(x, y - depth y exp(-width |x|^2)): orientation reverses near the origin
    once depth > 1, so small circles around 0 have folded images."""
    x, y = points[:, 0], points[:, 1]
    return np.column_stack([x, y - depth * y * np.exp(-width * (x * x + y * y))])


def sign_tol(t: np.ndarray) -> float:
    """Scale-aware zero for sign decisions on twist samples."""
    t = np.abs(t[np.isfinite(t)])
    return 1e-8 * float(np.median(t)) if t.size else 0.0


# -- sub-domains -------------------------------------------------------------

@dataclass(frozen=True)
class Ball:
    center: tuple[float, float]
    radius: float

    def contains(self, x):
        x = np.atleast_2d(x)
        return np.hypot(x[:, 0] - self.center[0], x[:, 1] - self.center[1]) < self.radius

    def corners(self):
        c, r = np.asarray(self.center), self.radius
        th = np.linspace(0, 2 * np.pi, 361)
        return c + r * np.column_stack([np.cos(th), np.sin(th)])


@dataclass(frozen=True)
class Box:
    lo: tuple[float, float]
    hi: tuple[float, float]

    def contains(self, x):
        x = np.atleast_2d(x)
        return ((x[:, 0] >= self.lo[0]) & (x[:, 0] <= self.hi[0])
                & (x[:, 1] >= self.lo[1]) & (x[:, 1] <= self.hi[1]))

    def corners(self):
        (x0, y0), (x1, y1) = self.lo, self.hi
        return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], float)


def _dist_to_boundary(mesh: Mesh, region) -> float:
    # both domain kinds are convex, so the extreme points of the region decide
    return float(mesh.dist_to_boundary(region.corners()).min())


@dataclass
class PenaltyResult:
    value: float
    r_prime: float
    centers: np.ndarray  # (K, 2)
    violation: np.ndarray  # inner integral of g(t) per centre
    min_twist: np.ndarray
    tol: np.ndarray
    weights: np.ndarray = field(repr=False)

    @property
    def violating(self) -> np.ndarray:
        return self.violation > 0

    def rows(self):
        return np.column_stack([self.centers, self.violation])


def penalty(mesh: Mesh, u: np.ndarray, region, r_prime: float) -> PenaltyResult:
    """Double sum of g(t) over node centres in ``region`` and balls B(x0, r')."""
    if not r_prime > 0:
        raise InvalidParams("r' must be positive")
    if not r_prime < _dist_to_boundary(mesh, region):
        raise InvalidParams("r' must be smaller than the distance from the region to the boundary")
    inside = region.contains(mesh.points) & (mesh.dist_to_boundary(mesh.points) > r_prime)
    idx = np.nonzero(inside)[0]
    weights = mesh.lumped_areas()[idx]
    tree = cKDTree(mesh.centroids)
    st = element_state(mesh, u)
    viol = np.zeros(len(idx))
    tmin = np.full(len(idx), np.inf)
    tols = np.zeros(len(idx))
    for k, node in enumerate(idx):
        x0 = mesh.points[node]
        tris = np.array(sorted(tree.query_ball_point(x0, r_prime)), dtype=int)
        tris = tris[np.hypot(*(mesh.centroids[tris] - x0).T) < r_prime]
        if tris.size == 0:
            continue
        d = mesh.centroids[tris] - x0
        R = np.hypot(d[:, 0], d[:, 1])
        keep = R > 1e-14
        tris, d, R = tris[keep], d[keep], R[keep]
        uc = (u[mesh.triangles[tris]] - u[node]).mean(axis=1)
        v = np.einsum("tij,tj->ti", st.adj[tris], uc)
        t = (v[:, 0] * d[:, 0] + v[:, 1] * d[:, 1]) / R
        tol = sign_tol(t)
        gt = g(t)
        gt[t >= -tol] = 0.0
        viol[k] = float(np.dot(mesh.areas[tris], gt))
        tmin[k] = float(t.min())
        tols[k] = tol
    value = float(np.dot(weights, viol))
    return PenaltyResult(value, float(r_prime), mesh.points[idx].copy(), viol, tmin, tols, weights)


# -- star-shapedness ---------------------------------------------------------

@dataclass
class StarShapeProfile:
    x0: tuple[float, float]
    R: float
    theta: np.ndarray
    rho: np.ndarray
    sigma: np.ndarray
    winding: float
    margin: float
    min_rho: float

    @property
    def star_shaped(self) -> bool:
        return abs(self.winding - 1.0) < 1e-6 and self.margin >= 0.0

    def rows(self):
        return np.column_stack([self.theta, self.rho, self.sigma])


def curve_profile(w: np.ndarray, theta: np.ndarray, rho_tol: float = 1e-12,
                  jump_limit: float = math.pi) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Polar profile of a closed sampled curve around the origin.

    ``w`` holds the samples at ``theta`` with the first point repeated at
    the end. Returns (rho, sigma, winding, margin).
    """
    rho = np.hypot(w[:, 0], w[:, 1])
    if rho.min() <= rho_tol * max(1.0, rho.max()):
        raise OriginOnCurve(f"curve passes within {rho.min():.3e} of the centre image")
    ang = np.arctan2(w[:, 1], w[:, 0])
    jumps = np.angle(np.exp(1j * np.diff(ang)))
    if np.any(np.abs(jumps) >= jump_limit):
        raise UnwrapAmbiguous("angle jump between samples is too large; increase n_theta")
    sigma = np.concatenate([[ang[0]], ang[0] + np.cumsum(jumps)])
    winding = (sigma[-1] - sigma[0]) / (2.0 * np.pi)
    return rho, sigma, float(winding), float(jumps.min())


def star_profile(mesh: Mesh, u: np.ndarray, x0, R: float, n_theta: int = 256) -> StarShapeProfile:
    if n_theta < 64:
        raise InvalidParams("n_theta must be at least 64")
    x0 = np.asarray(x0, dtype=float)
    if not mesh.dist_to_boundary(x0[None])[0] >= R - 1e-14:
        raise OutOfDomain("circle leaves the domain")
    theta = 2.0 * np.pi * np.arange(n_theta + 1) / n_theta
    pts = x0 + R * np.column_stack([np.cos(theta), np.sin(theta)])
    pts[-1] = pts[0]
    w = interpolate(mesh, u, pts) - interpolate(mesh, u, x0)
    rho, sigma, winding, margin = curve_profile(w, theta)
    return StarShapeProfile((float(x0[0]), float(x0[1])), float(R), theta, rho, sigma,
                            winding, margin, float(rho.min()))


@dataclass
class EquivalenceReport:
    radii: np.ndarray
    shell_min_twist: np.ndarray
    star_margin: np.ndarray  # NaN when the profile is undefined
    twist_ok: np.ndarray
    star_ok: np.ndarray
    notes: list[str]

    @property
    def table(self) -> dict[str, int]:
        a, b = self.twist_ok, self.star_ok
        return {"both_ok": int(np.sum(a & b)), "twist_only": int(np.sum(a & ~b)),
                "star_only": int(np.sum(~a & b)), "both_flag": int(np.sum(~a & ~b))}

    @property
    def disagreement_rate(self) -> float:
        return float(np.mean(self.twist_ok != self.star_ok))


def equivalence_probe(mesh: Mesh, u: np.ndarray, x0, r_prime: float, radii_count: int = 16,
                      n_theta: int = 256, shell: float | None = None) -> EquivalenceReport:
    """Compare the twist sign on thin shells with star-shapedness of circle images.

    Radii are the midpoints R_j = r' (j + 1/2) / radii_count. The shell
    around R_j collects triangles with centroid distance within ``shell``
    (default: one longest edge) of R_j.
    """
    x0 = np.asarray(x0, dtype=float)
    t = twist_field(mesh, u, x0)
    d = mesh.centroids - x0
    Rc = np.hypot(d[:, 0], d[:, 1])
    tol = sign_tol(t[Rc < r_prime])
    width = mesh.h if shell is None else shell
    radii = r_prime * (np.arange(radii_count) + 0.5) / radii_count
    tmin = np.empty(radii_count)
    margin = np.full(radii_count, np.nan)
    star_ok = np.zeros(radii_count, bool)
    notes = []
    for j, R in enumerate(radii):
        sel = (np.abs(Rc - R) <= 0.5 * width) & np.isfinite(t)
        tmin[j] = t[sel].min() if sel.any() else np.nan
        try:
            prof = star_profile(mesh, u, x0, R, n_theta)
        except (OriginOnCurve, UnwrapAmbiguous) as exc:
            notes.append(f"R={R:.6e}: {type(exc).__name__}")
            continue
        margin[j] = prof.margin
        star_ok[j] = abs(prof.winding - 1.0) < 1e-6 and prof.margin >= -1e-12
    twist_ok = ~(tmin < -tol)
    return EquivalenceReport(radii, tmin, margin, twist_ok, star_ok, notes)
