"""P1 triangulations of the square Q = [-1, 1]^2 and of discs.

Fields live at the vertices; gradients, determinants and adjugates are
constant per triangle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from .errors import InvalidParams, OutOfDomain


@dataclass(eq=False)
class Mesh:
    kind: str  # "square" or "disc"
    n: int
    radius: float  # disc radius; 1.0 (half side) for the square
    points: np.ndarray  # (N, 2)
    triangles: np.ndarray  # (M, 3), counter-clockwise
    boundary: np.ndarray  # (N,) bool
    dirichlet: np.ndarray  # (N,) bool, subset of boundary
    areas: np.ndarray = field(init=False)
    centroids: np.ndarray = field(init=False)
    basis_grads: np.ndarray = field(init=False)  # (M, 3, 2): grad of each hat function
    _tree: cKDTree | None = field(init=False, default=None, repr=False)

    def __post_init__(self):
        p = self.points[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        cross = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        self.areas = 0.5 * cross
        self.centroids = p.mean(axis=1)
        # rows of inv([e1 e2]) are the gradients of the hat functions 1 and 2
        inv = np.empty((len(cross), 2, 2))
        inv[:, 0, 0] = e2[:, 1] / cross
        inv[:, 0, 1] = -e2[:, 0] / cross
        inv[:, 1, 0] = -e1[:, 1] / cross
        inv[:, 1, 1] = e1[:, 0] / cross
        g = np.empty((len(cross), 3, 2))
        g[:, 1] = inv[:, 0]
        g[:, 2] = inv[:, 1]
        g[:, 0] = -(g[:, 1] + g[:, 2])
        self.basis_grads = g

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def h(self) -> float:
        """Longest edge length."""
        p = self.points[self.triangles]
        edges = np.concatenate([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]])
        return float(np.sqrt((edges**2).sum(axis=1)).max())

    @property
    def area(self) -> float:
        return float(np.sum(self.areas))

    def lumped_areas(self) -> np.ndarray:
        return np.bincount(self.triangles.ravel(), np.repeat(self.areas / 3.0, 3),
                           minlength=self.n_points)

    def dist_to_boundary(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.kind == "square":
            return 1.0 - np.abs(x).max(axis=1)
        return self.radius - np.hypot(x[:, 0], x[:, 1])

    def contains(self, x, tol: float = 1e-12) -> np.ndarray:
        return self.dist_to_boundary(x) >= -tol

    # -- differential operators -----------------------------------------
    def gradient(self, u: np.ndarray) -> np.ndarray:
        """Per-triangle gradient: (M, 2, 2) with [i, j] = d u_i / d x_j for vector
        fields, (M, 2) for scalar fields."""
        u = np.asarray(u, dtype=float)
        ut = u[self.triangles]
        g = self.basis_grads
        if u.ndim == 1:
            return ut[:, 0, None] * g[:, 0] + ut[:, 1, None] * g[:, 1] + ut[:, 2, None] * g[:, 2]
        return (ut[:, 0, :, None] * g[:, 0, None, :] + ut[:, 1, :, None] * g[:, 1, None, :]
                + ut[:, 2, :, None] * g[:, 2, None, :])

    def assemble(self, elem_vectors: np.ndarray) -> np.ndarray:
        """Sum per-triangle contributions (M, 3[, k]) into nodal values."""
        idx = self.triangles.ravel()
        if elem_vectors.ndim == 2:
            return np.bincount(idx, elem_vectors.ravel(), minlength=self.n_points)
        k = elem_vectors.shape[2]
        flat = elem_vectors.reshape(-1, k)
        return np.column_stack([np.bincount(idx, flat[:, j], minlength=self.n_points)
                                for j in range(k)])

    def centroid_values(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u, dtype=float)[self.triangles].mean(axis=1)

    # -- point location ---------------------------------------------------
    def locate(self, x, k: int = 12):
        """Return (triangle index, barycentric coordinates) for each point."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self._tree is None:
            self._tree = cKDTree(self.centroids)
        k = min(k, self.n_triangles)
        _, cand = self._tree.query(x, k=k)
        cand = np.atleast_2d(cand)
        tri = np.full(len(x), -1)
        bary = np.zeros((len(x), 3))
        for j in range(k):
            todo = tri < 0
            if not todo.any():
                break
            t = cand[todo, j]
            lam = self._barycentric(t, x[todo])
            ok = lam.min(axis=1) >= -1e-10
            sel = np.nonzero(todo)[0][ok]
            tri[sel] = t[ok]
            bary[sel] = lam[ok]
        missing = tri < 0
        if missing.any():
            if k < min(96, self.n_triangles):
                t2, b2 = self.locate(x[missing], k=min(96, self.n_triangles))
                tri[missing], bary[missing] = t2, b2
            else:
                raise OutOfDomain(f"point {x[missing][0]} is outside the mesh")
        return tri, bary

    def _barycentric(self, t, x):
        p0 = self.points[self.triangles[t, 0]]
        g = self.basis_grads[t]
        l1 = np.einsum("ij,ij->i", g[:, 1], x - p0)
        l2 = np.einsum("ij,ij->i", g[:, 2], x - p0)
        return np.column_stack([1.0 - l1 - l2, l1, l2])


@dataclass(eq=False)
class ElementState:
    grad: np.ndarray  # (M, 2, 2)
    det: np.ndarray
    adj: np.ndarray
    centroid: np.ndarray


def adjugate(F: np.ndarray) -> np.ndarray:
    adj = np.empty_like(F)
    adj[..., 0, 0] = F[..., 1, 1]
    adj[..., 0, 1] = -F[..., 0, 1]
    adj[..., 1, 0] = -F[..., 1, 0]
    adj[..., 1, 1] = F[..., 0, 0]
    return adj


def det2(F: np.ndarray) -> np.ndarray:
    return F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]


def element_state(mesh: Mesh, u: np.ndarray) -> ElementState:
    F = mesh.gradient(u)
    return ElementState(grad=F, det=det2(F), adj=adjugate(F), centroid=mesh.centroids)


def interpolate(mesh: Mesh, u: np.ndarray, point) -> np.ndarray:
    """Barycentric P1 interpolation; a single point returns a single value."""
    pts = np.asarray(point, dtype=float)
    single = pts.ndim == 1
    tri, lam = mesh.locate(pts)
    vals = np.asarray(u, dtype=float)[mesh.triangles[tri]]
    out = np.einsum("pa,pa...->p...", lam, vals)
    return out[0] if single else out


# -- constructors ----------------------------------------------------------

def _square(n: int, dirichlet: str) -> Mesh:
    xs = np.linspace(-1.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="xy")
    points = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)  # idx[j, i]: row j (y), column i (x)
    a = idx[:-1, :-1].ravel()
    b = idx[:-1, 1:].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[1:, :-1].ravel()
    # every cell is split along the same (a, c) diagonal
    tris = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    ax, ay = np.abs(points[:, 0]), np.abs(points[:, 1])
    boundary = (ax == 1.0) | (ay == 1.0)
    if dirichlet == "full":
        dmask = boundary.copy()
    elif dirichlet == "top_bottom":
        dmask = ay == 1.0
    else:
        raise InvalidParams(f"unknown Dirichlet subset {dirichlet!r}")
    return Mesh("square", n, 1.0, points, tris, boundary, dmask)


def _disc(n: int, radius: float) -> Mesh:
    # ring k carries 6k nodes; ring 0 is the centre
    pts = [np.zeros((1, 2))]
    offsets = [0]
    count = 1
    for k in range(1, n + 1):
        th = 2.0 * np.pi * np.arange(6 * k) / (6 * k)
        r = radius * k / n
        pts.append(np.column_stack([r * np.cos(th), r * np.sin(th)]))
        offsets.append(count)
        count += 6 * k
    points = np.concatenate(pts)
    if n > 0:
        # snap the outer ring exactly onto the circle
        outer = points[offsets[n]:]
        th = 2.0 * np.pi * np.arange(6 * n) / (6 * n)
        outer[:, 0] = radius * np.cos(th)
        outer[:, 1] = radius * np.sin(th)
    tris = []
    for k in range(1, n + 1):
        n_out = 6 * k
        out0 = offsets[k]
        if k == 1:
            j = np.arange(n_out)
            tris.append(np.column_stack([np.zeros(n_out, int), out0 + j, out0 + (j + 1) % n_out]))
            continue
        n_in = 6 * (k - 1)
        in0 = offsets[k - 1]
        i = j = 0
        rows = []
        # zipper between consecutive rings by angle
        while i < n_in or j < n_out:
            a_in = (i + 1) / n_in
            a_out = (j + 1) / n_out
            if j < n_out and (i >= n_in or a_out <= a_in):
                rows.append((in0 + i % n_in, out0 + j, out0 + (j + 1) % n_out))
                j += 1
            else:
                rows.append((in0 + i % n_in, out0 + (j % n_out), in0 + (i + 1) % n_in))
                i += 1
        tris.append(np.array(rows))
    triangles = np.concatenate(tris)
    boundary = np.zeros(len(points), bool)
    boundary[offsets[n]:] = True
    return Mesh("disc", n, float(radius), points, triangles, boundary, boundary.copy())


def make_mesh(kind: str = "square", n: int = 16, radius: float = 1.0,
              dirichlet: str = "full") -> Mesh:
    """Structured triangulation.

    ``kind="square"``: Q = [-1, 1]^2 with ``n`` cells per side, each cell
    split along one fixed diagonal. ``kind="disc"``: ``n`` concentric rings
    of radius ``radius`` around a six-triangle centre patch.
    """
    if int(n) != n or n < 2:
        raise InvalidParams("need an integer n >= 2")
    n = int(n)
    if kind == "square":
        mesh = _square(n, dirichlet)
    elif kind == "disc":
        if not radius > 0:
            raise InvalidParams("disc radius must be positive")
        mesh = _disc(n, radius)
    else:
        raise InvalidParams(f"unknown domain {kind!r}")
    if np.any(mesh.areas <= 0):
        raise AssertionError("non-positive triangle area in constructed mesh")
    return mesh


def domain_area(mesh: Mesh) -> float:
    """Area of the continuum domain the mesh approximates."""
    return 4.0 if mesh.kind == "square" else math.pi * mesh.radius**2


def stiffness_matrix(mesh: Mesh) -> sparse.csr_matrix:
    """P1 Laplacian, K_ab = sum_T |T| grad phi_a . grad phi_b."""
    g = mesh.basis_grads
    local = mesh.areas[:, None, None] * np.einsum("tai,tbi->tab", g, g)
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    K = sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(mesh.n_points, mesh.n_points))
    return K.tocsr()
