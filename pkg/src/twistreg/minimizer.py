"""Feasible descent for energies with a barrier on the Jacobian.

The driver works on a flat vector of free unknowns through a small problem
object, so the elastic model and the shear model share one loop:

* search direction ``-P^{-1} g`` with ``P`` a stiffness-type matrix on the
  free nodes (plain gradient when ``P`` is absent);
* Barzilai-Borwein step proposal in the ``P`` metric;
* backtracking that first restores det > 0 on every triangle and then
  enforces the Armijo condition;
* energy differences summed triangle by triangle, so unchanged triangles
  contribute exactly zero and small decreases are not lost to cancellation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.sparse.linalg import splu

from .elastic import EnergyConfig, element_energy, element_energy_delta, energy_gradient
from .errors import InfeasibleStart, InvalidParams, LineSearchStalled
from .grid import Mesh, det2, stiffness_matrix

TRACE_HEADER = "iter,energy,grad_norm,step,min_det"


@dataclass(frozen=True)
class SolveSettings:
    max_iters: int = 5000
    grad_tol: float = 1e-8
    armijo: float = 1e-4
    shrink: float = 0.5
    initial_step: float = 1.0
    kappa: float = 0.5  # kept for config compatibility; the guard only asks for det > 0
    min_step: float = 1e-20
    precondition: bool = True

    def __post_init__(self):
        if not 0 < self.kappa < 1:
            raise InvalidParams("kappa must lie in (0, 1)")
        if not self.grad_tol > 0:
            raise InvalidParams("grad_tol must be positive")
        if not 0 < self.armijo < 1 or not 0 < self.shrink < 1:
            raise InvalidParams("armijo and shrink must lie in (0, 1)")
        if not self.initial_step > 0 or self.max_iters < 0:
            raise InvalidParams("initial_step must be positive and max_iters nonnegative")


@dataclass
class Problem:
    """Energy on free unknowns ``x``; ``expand`` maps x to the full field."""

    expand: Callable[[np.ndarray], np.ndarray]
    expand_direction: Callable[[np.ndarray], np.ndarray]  # zero on fixed nodes
    element_energy: Callable[[np.ndarray], np.ndarray]
    energy_delta: Callable[[np.ndarray, np.ndarray], np.ndarray]  # (field, increment)
    gradient: Callable[[np.ndarray], np.ndarray]  # full field -> flat free gradient
    min_det: Callable[[np.ndarray], float]
    weights: np.ndarray  # lumped nodal areas of the free unknowns
    solve_precond: Callable[[np.ndarray], np.ndarray] | None = None


@dataclass
class LineSearchResult:
    step: float
    x: np.ndarray
    decrease: float
    guard_halvings: int
    armijo_halvings: int


def line_search(problem: Problem, x: np.ndarray, direction: np.ndarray, grad: np.ndarray,
                settings: SolveSettings, t0: float | None = None) -> LineSearchResult:
    """Halve until det > 0 everywhere, then halve until the Armijo test passes."""
    t = settings.initial_step if t0 is None else t0
    if not np.any(direction):
        return LineSearchResult(t, x, 0.0, 0, 0)
    slope = float(np.dot(grad, direction))
    full = problem.expand(x)
    dfull = problem.expand_direction(direction)
    guard = 0
    while problem.min_det(full + t * dfull) <= 0:
        t *= settings.shrink
        guard += 1
        if t < settings.min_step:
            raise LineSearchStalled("no feasible step along the direction")
    armijo = 0
    while True:
        de = problem.energy_delta(full, t * dfull)
        dE = math.fsum(de) if np.all(np.isfinite(de)) else math.inf
        if dE <= settings.armijo * t * slope:
            return LineSearchResult(t, x + t * direction, -dE, guard, armijo)
        t *= settings.shrink
        armijo += 1
        if t < settings.min_step:
            raise LineSearchStalled(f"Armijo test failed down to step {t:.3e}")


@dataclass
class SolveResult:
    x: np.ndarray
    field: np.ndarray
    energy: float
    grad_norm: float
    min_det: float
    iterations: int
    status: str  # "converged", "max_iters" or "roundoff"
    trace: list[tuple[int, float, float, float, float]] = field(repr=False)


def descend(problem: Problem, x0: np.ndarray, settings: SolveSettings) -> SolveResult:
    """Run the descent loop from a feasible ``x0``.

    The energy column of the trace is the starting energy minus the sum of
    accepted decreases, so it is nonincreasing by construction.
    """
    x = np.array(x0, dtype=float)
    full = problem.expand(x)
    if problem.min_det(full) <= 0:
        raise InfeasibleStart("initial field has a triangle with det <= 0")
    elem = problem.element_energy(full)
    if not np.all(np.isfinite(elem)):
        raise InfeasibleStart("initial energy is infinite")
    E = math.fsum(elem)
    g = problem.gradient(full)
    res = float(np.max(np.abs(g) / problem.weights, initial=0.0))
    trace = [(0, E, res, 0.0, problem.min_det(full))]
    status = "max_iters"
    prev = None  # (step, direction, slope, gradient)
    it = 0
    while it < settings.max_iters:
        if res <= settings.grad_tol:
            status = "converged"
            break
        p = -problem.solve_precond(g) if problem.solve_precond else -g
        slope = float(np.dot(g, p))
        t0 = settings.initial_step
        if prev is not None:
            tp, pp, slope_p, gp = prev
            sy = tp * float(np.dot(pp, g - gp))
            if sy > 0:
                # s^T P s / s^T y, using P p_prev = -g_prev
                t0 = tp * tp * (-slope_p) / sy
        try:
            ls = line_search(problem, x, p, g, settings, t0)
        except LineSearchStalled:
            if abs(slope) * t0 <= 64 * np.finfo(float).eps * max(abs(E), 1.0):
                status = "roundoff"
                break
            raise
        it += 1
        prev = (ls.step, p, slope, g)
        x = ls.x
        E -= ls.decrease
        full = problem.expand(x)
        g = problem.gradient(full)
        res = float(np.max(np.abs(g) / problem.weights, initial=0.0))
        trace.append((it, E, res, ls.step, problem.min_det(full)))
    if status == "max_iters" and res <= settings.grad_tol:
        status = "converged"
    return SolveResult(x, full, math.fsum(problem.element_energy(full)), res,
                       problem.min_det(full), it, status, trace)


# -- elastic problem ------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryData:
    """Analytic boundary map; ``values`` is evaluated at arbitrary points."""

    kind: str = "identity"  # identity | affine | radial | wave | table
    A: tuple[tuple[float, float], tuple[float, float]] = ((1.0, 0.0), (0.0, 1.0))
    b: tuple[float, float] = (0.0, 0.0)
    radial: tuple[float, float] = (0.5, 0.5)  # x (p + q |x|)
    amplitude: float = 0.1
    table: tuple[tuple[float, float, float, float], ...] = ()

    def values(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if self.kind == "identity":
            return pts.copy()
        if self.kind == "affine":
            return pts @ np.asarray(self.A, float).T + np.asarray(self.b, float)
        if self.kind == "radial":
            p, q = self.radial
            return pts * (p + q * np.hypot(pts[:, 0], pts[:, 1]))[:, None]
        if self.kind == "wave":
            a = self.amplitude
            return np.column_stack([pts[:, 0] + a * np.sin(np.pi * pts[:, 1]),
                                    pts[:, 1] + a * np.sin(np.pi * pts[:, 0])])
        if self.kind == "table":
            tab = np.asarray(self.table, float)
            from scipy.spatial import cKDTree
            dist, idx = cKDTree(tab[:, :2]).query(pts)
            if np.any(dist > 1e-9):
                raise InvalidParams("boundary table does not cover every requested point")
            return tab[idx, 2:4].copy()
        raise InvalidParams(f"unknown boundary kind {self.kind!r}")


BOUNDARY_PRESETS: dict[str, BoundaryData] = {
    "identity": BoundaryData("identity"),
    "stretch": BoundaryData("affine", A=((1.2, 0.1), (0.0, 0.9))),
    "radial_squeeze": BoundaryData("radial", radial=(0.5, 0.5)),
    "wave": BoundaryData("wave", amplitude=0.1),
}


def impose(mesh: Mesh, u: np.ndarray, boundary: BoundaryData) -> np.ndarray:
    out = np.array(u, dtype=float)
    out[mesh.dirichlet] = boundary.values(mesh.points[mesh.dirichlet])
    return out


def harmonic_extension(mesh: Mesh, boundary: BoundaryData) -> np.ndarray:
    """Componentwise discrete harmonic field with the given boundary values."""
    K = stiffness_matrix(mesh).tocsc()
    free = ~mesh.dirichlet
    u = impose(mesh, mesh.points, boundary)
    if free.any():
        rhs = -K[free][:, mesh.dirichlet] @ u[mesh.dirichlet]
        u[free] = splu(K[free][:, free].tocsc()).solve(np.asarray(rhs))
    return u


def initial_field(mesh: Mesh, boundary: BoundaryData, mode: str = "harmonic") -> np.ndarray:
    """Feasible start.

    ``harmonic``: discrete harmonic extension, blended toward the identity
    in the interior if it folds. ``analytic``: the boundary map evaluated
    at every node.
    """
    if mode == "analytic":
        u = boundary.values(mesh.points)
        if det2(mesh.gradient(u)).min() <= 0:
            raise InfeasibleStart("analytic extension folds")
        return u
    if mode != "harmonic":
        raise InvalidParams(f"unknown initialisation {mode!r}")
    uh = harmonic_extension(mesh, boundary)
    free = ~mesh.dirichlet
    for tau in (0.0, 0.25, 0.5, 0.75, 1.0):
        u = uh.copy()
        u[free] = (1 - tau) * uh[free] + tau * mesh.points[free]
        if det2(mesh.gradient(u)).min() > 0:
            return u
    raise InfeasibleStart("no blend of the harmonic extension is feasible")


def elastic_problem(mesh: Mesh, u_fixed: np.ndarray, config: EnergyConfig,
                    precondition: bool = True) -> Problem:
    """Unknowns are the free nodal values, ordered component-major."""
    free = ~mesh.dirichlet
    nf = int(free.sum())
    base = np.array(u_fixed, dtype=float)

    def expand(x):
        u = base.copy()
        u[free, 0] = x[:nf]
        u[free, 1] = x[nf:]
        return u

    def expand_direction(p):
        du = np.zeros_like(base)
        du[free, 0] = p[:nf]
        du[free, 1] = p[nf:]
        return du

    def grad(u):
        g = energy_gradient(mesh, u, config, project=False)[free]
        return np.concatenate([g[:, 0], g[:, 1]])

    w = mesh.lumped_areas()[free]
    precond = None
    if precondition and nf:
        lu = splu((2.0 * config.lam * stiffness_matrix(mesh)[free][:, free]).tocsc())

        def block_solve(g):
            return np.concatenate([lu.solve(g[:nf]), lu.solve(g[nf:])])

        precond = block_solve

    return Problem(expand, expand_direction, lambda u: element_energy(mesh, u, config),
                   lambda u, du: element_energy_delta(mesh, u, du, config), grad,
                   lambda u: float(det2(mesh.gradient(u)).min()),
                   np.concatenate([w, w]), precond)


def minimize(mesh: Mesh, u_init: np.ndarray, boundary: BoundaryData, config: EnergyConfig,
             settings: SolveSettings = SolveSettings()) -> SolveResult:
    u0 = impose(mesh, u_init, boundary)
    free = ~mesh.dirichlet
    prob = elastic_problem(mesh, u0, config, settings.precondition)
    x0 = np.concatenate([u0[free, 0], u0[free, 1]])
    return descend(prob, x0, settings)


def local_min_witness(mesh: Mesh, u: np.ndarray, config: EnergyConfig, gamma: float = 1e-3,
                      samples: int = 64, seed: int = 0, rel_tol: float = 1e-8) -> dict:
    """Random feasible perturbations of sup-size gamma with fixed boundary values."""
    rng = np.random.default_rng(seed)
    E0 = math.fsum(element_energy(mesh, u, config))
    worst = math.inf
    tested = 0
    free = ~mesh.dirichlet
    for _ in range(samples):
        dv = np.zeros_like(u)
        dv[free] = gamma * rng.uniform(-1.0, 1.0, size=(int(free.sum()), 2))
        de = element_energy_delta(mesh, u, dv, config)
        if not np.all(np.isfinite(de)):
            continue
        tested += 1
        worst = min(worst, math.fsum(de))
    return {"energy": E0, "samples": tested, "worst_change": worst,
            "holds": bool(tested > 0 and worst >= -rel_tol * abs(E0))}


def trace_rows(result: SolveResult) -> np.ndarray:
    return np.array(result.trace, dtype=float)
