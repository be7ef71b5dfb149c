"""Stored-energy laws h(det F).

Two families are provided:

* :class:`PaperLaw` -- logarithmic for small determinants, linear for large
  ones, joined on ``[c1, c2]`` by a convex connector built from two affine
  densities ``psi1``, ``psi2`` that solve a pair of 2x2 moment systems.
* :class:`GeneralLaw` -- ``a (s-1)^2 + b (1/s + s - 2)``, used by the shear
  model where only growth/doubling hypotheses are needed.

Both return ``math.inf`` (never an overflowed float) for ``s <= 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, InfeasibleLaw, InvalidParams

INF = math.inf


def _as_array(s):
    arr = np.asarray(s, dtype=float)
    return arr, arr.ndim == 0


def _ret(out, scalar):
    return float(out) if scalar else out


@dataclass(frozen=True)
class PaperLaw:
    c1: float
    c2: float
    l: float
    m: float
    theta1: float
    psi1_coeffs: tuple[float, float]  # psi1(s) = a1 + b1 s on [c1, 1]
    psi2_coeffs: tuple[float, float]  # psi2(s) = a2 + b2 s on [1, c2]
    name: str = "custom"

    # -- branch formulas -------------------------------------------------
    def branch(self, which: str, s, derivative: int = 0):
        """Evaluate one branch formula outside its dispatch interval.

        ``which`` is one of ``"log"``, ``"left"`` (connector on [c1, 1]),
        ``"right"`` (connector on [1, c2]) or ``"linear"``.
        """
        s = np.asarray(s, dtype=float)
        c1 = self.c1
        a1, b1 = self.psi1_coeffs
        a2, b2 = self.psi2_coeffs
        if which == "log":
            return (-np.log(s), -1.0 / s, 1.0 / s**2)[derivative]
        if which == "left":
            if derivative == 0:
                return (1.0 - math.log(c1) - s / c1 + a1 * (s - c1) ** 2 / 2.0
                        + b1 * (s**3 - 3.0 * c1**2 * s + 2.0 * c1**3) / 6.0)
            if derivative == 1:
                return -1.0 / c1 + a1 * (s - c1) + b1 * (s**2 - c1**2) / 2.0
            return a1 + b1 * s
        if which == "right":
            if derivative == 0:
                return (self.theta1 + a2 * (s - 1.0) ** 2 / 2.0
                        + b2 * (s**3 - 3.0 * s + 2.0) / 6.0)
            if derivative == 1:
                return a2 * (s - 1.0) + b2 * (s**2 - 1.0) / 2.0
            return a2 + b2 * s
        if which == "linear":
            return (self.l * s + self.m, self.l + 0.0 * s, 0.0 * s)[derivative]
        raise ValueError(f"unknown branch {which!r}")

    def _dispatch(self, s, derivative):
        out = np.empty_like(s)
        pos = s > 0
        lo = pos & (s < self.c1)
        left = (s >= self.c1) & (s < 1.0)
        right = (s >= 1.0) & (s <= self.c2)
        lin = s > self.c2
        for mask, name in ((lo, "log"), (left, "left"), (right, "right"), (lin, "linear")):
            if mask.any():
                out[mask] = self.branch(name, s[mask], derivative)
        return out, pos

    def eval(self, s):
        s, scalar = _as_array(s)
        out, pos = self._dispatch(s, 0)
        out[~pos] = INF
        return _ret(out, scalar)

    def _branch_delta(self, which, s, ds):
        c1 = self.c1
        a1, b1 = self.psi1_coeffs
        a2, b2 = self.psi2_coeffs
        cube = ds * (3.0 * s**2 + 3.0 * s * ds + ds**2)  # (s+ds)^3 - s^3
        if which == "log":
            return -np.log1p(ds / s)
        if which == "left":
            return -ds / c1 + a1 * ds * (2.0 * (s - c1) + ds) / 2.0 + b1 * (cube - 3.0 * c1**2 * ds) / 6.0
        if which == "right":
            return a2 * ds * (2.0 * (s - 1.0) + ds) / 2.0 + b2 * (cube - 3.0 * ds) / 6.0
        return self.l * ds

    def delta(self, s, ds):
        """h(s + ds) - h(s) for s > 0, free of cancellation for small ds.

        The increment is split at the joints and each piece uses its own
        branch, so crossing a joint costs no accuracy.
        """
        s = np.asarray(s, dtype=float)
        ds = np.broadcast_to(np.asarray(ds, dtype=float), s.shape)
        t = s + ds
        out = np.zeros(np.broadcast(s, t).shape)
        pieces = (("log", 0.0, self.c1), ("left", self.c1, 1.0),
                  ("right", 1.0, self.c2), ("linear", self.c2, INF))
        with np.errstate(invalid="ignore", divide="ignore"):
            for which, lo, hi in pieces:
                a = np.clip(s, lo, hi)
                b = np.clip(t, lo, hi)
                step = b - a
                moved = step != 0
                if moved.any():
                    out[moved] += self._branch_delta(which, a[moved], step[moved])
        out[t <= 0] = INF
        return out

    def eval_prime(self, s):
        s, scalar = _as_array(s)
        if np.any(s <= 0):
            raise DomainError("h' is undefined for s <= 0")
        out, _ = self._dispatch(s, 1)
        return _ret(out, scalar)

    def eval_second(self, s):
        s, scalar = _as_array(s)
        if np.any(s <= 0):
            raise DomainError("h'' is undefined for s <= 0")
        out, _ = self._dispatch(s, 2)
        return _ret(out, scalar)

    # -- diagnostics -----------------------------------------------------
    def moment_residuals(self):
        a1, b1 = self.psi1_coeffs
        a2, b2 = self.psi2_coeffs
        c1, c2 = self.c1, self.c2
        m0_1 = a1 * (1 - c1) + b1 * (1 - c1**2) / 2
        m1_1 = a1 * (1 - c1**2) / 2 + b1 * (1 - c1**3) / 3
        m0_2 = a2 * (c2 - 1) + b2 * (c2**2 - 1) / 2
        m1_2 = a2 * (c2**2 - 1) / 2 + b2 * (c2**3 - 1) / 3
        return {
            "psi1_mass": m0_1 - 1.0 / c1,
            "psi1_moment": m1_1 - (1.0 - self.theta1 - math.log(c1)),
            "psi2_mass": m0_2 - self.l,
            "psi2_moment": m1_2 - (self.theta1 - self.m),
        }

    def joint_gaps(self):
        """Value and slope jumps at c1, 1 and c2 computed from the branch formulas."""
        gaps = {}
        for x, lo, hi in ((self.c1, "log", "left"), (1.0, "left", "right"),
                          (self.c2, "right", "linear")):
            for d in (0, 1):
                gaps[f"d{d}@{x:g}"] = float(self.branch(hi, x, d) - self.branch(lo, x, d))
        return gaps

    def invariant_report(self, tol: float = 1e-10) -> dict:
        res = self.moment_residuals()
        gaps = self.joint_gaps()
        a1, b1 = self.psi1_coeffs
        a2, b2 = self.psi2_coeffs
        checks = {
            "branch_order": 0 < self.c1 < 1 < self.c2,
            "theta1_gt_m_plus_l": self.theta1 > self.m + self.l,
            "psi1_positive": min(a1 + b1 * self.c1, a1 + b1) >= 0 and max(a1 + b1 * self.c1, a1 + b1) > 0,
            "psi2_positive": min(a2 + b2, a2 + b2 * self.c2) >= 0 and max(a2 + b2, a2 + b2 * self.c2) > 0,
            "moments": max(abs(v) for v in res.values()) <= 1e-12,
            "joints": max(abs(v) for v in gaps.values()) <= tol,
            "h_prime_c1": float(self.branch("left", self.c1, 1)) == -1.0 / self.c1,
            "h_prime_1": float(self.eval_prime(1.0)) == 0.0
            and abs(float(self.branch("left", 1.0, 1))) <= tol,
            "minimum_value": float(self.eval(1.0)) == self.theta1 and self.theta1 > 0,
        }
        return {"checks": checks, "moment_residuals": res, "joint_gaps": gaps}


def build_paper_law(c1: float, c2: float, l: float, m: float, theta1: float,
                    name: str = "custom") -> PaperLaw:
    """Solve the two moment systems for affine connector densities.

    Raises :class:`InvalidParams` for inadmissible constants and
    :class:`InfeasibleLaw` when the solved density is not positive on its
    interval (no affine connector exists for these constants).
    """
    if not (0 < c1 < 1 < c2 < math.inf):
        raise InvalidParams("need 0 < c1 < 1 < c2")
    if not l > 0:
        raise InvalidParams("need l > 0")
    if not l * c2 + m > 0:
        raise InvalidParams("need l*c2 + m > 0")
    if not theta1 > m + l:
        raise InvalidParams("need theta1 > m + l")

    A1 = np.array([[1 - c1, (1 - c1**2) / 2], [(1 - c1**2) / 2, (1 - c1**3) / 3]])
    r1 = np.array([1.0 / c1, 1.0 - theta1 - math.log(c1)])
    A2 = np.array([[c2 - 1, (c2**2 - 1) / 2], [(c2**2 - 1) / 2, (c2**3 - 1) / 3]])
    r2 = np.array([l, theta1 - m])
    a1, b1 = np.linalg.solve(A1, r1)
    a2, b2 = np.linalg.solve(A2, r2)

    ends1 = (a1 + b1 * c1, a1 + b1)
    ends2 = (a2 + b2, a2 + b2 * c2)
    # affine density is positive on the open interval iff both ends >= 0, not both 0
    if min(ends1) < 0 or max(ends1) <= 0:
        raise InfeasibleLaw(f"psi1 not positive on ({c1}, 1): end values {ends1}")
    if min(ends2) < 0 or max(ends2) <= 0:
        raise InfeasibleLaw(f"psi2 not positive on (1, {c2}): end values {ends2}")
    return PaperLaw(c1, c2, l, m, theta1, (float(a1), float(b1)), (float(a2), float(b2)), name)


@dataclass(frozen=True)
class GeneralLaw:
    """h(s) = a (s-1)^2 + b (1/s + s - 2) for s > 0, +inf otherwise."""

    a: float
    b: float
    q1: float
    q2: float
    K: float
    s0: float
    name: str = "general"

    def eval(self, s):
        s, scalar = _as_array(s)
        out = np.full_like(s, INF)
        pos = s > 0
        sp = s[pos]
        out[pos] = self.a * (sp - 1.0) ** 2 + self.b * (1.0 / sp + sp - 2.0)
        return _ret(out, scalar)

    def delta(self, s, ds):
        """h(s + ds) - h(s) in a cancellation-free form; s > 0."""
        s = np.asarray(s, dtype=float)
        ds = np.broadcast_to(np.asarray(ds, dtype=float), s.shape)
        t = s + ds
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.a * ds * (2.0 * (s - 1.0) + ds) + self.b * (ds - ds / (s * t))
        return np.where(t > 0, out, INF)

    def eval_prime(self, s):
        s, scalar = _as_array(s)
        if np.any(s <= 0):
            raise DomainError("h' is undefined for s <= 0")
        return _ret(2.0 * self.a * (s - 1.0) + self.b * (1.0 - 1.0 / s**2), scalar)

    def eval_second(self, s):
        s, scalar = _as_array(s)
        if np.any(s <= 0):
            raise DomainError("h'' is undefined for s <= 0")
        return _ret(2.0 * self.a + 2.0 * self.b / s**3, scalar)

    def doubling_holds(self, s_samples) -> bool:
        s = np.asarray(s_samples, dtype=float)
        return bool(np.all(self.eval(s / 2) <= self.K * self.eval(s)))

    def growth_holds(self, s_samples) -> bool:
        s = np.asarray(s_samples, dtype=float)
        s = s[s > 1]
        return bool(np.all(self.eval_prime(s) <= 2 * self.q1 * s + self.q2 + 1e-12 * np.abs(s)))


def _doubling_radius(a: float, b: float, K: float) -> float:
    """Largest s0 with h(s/2) <= K h(s) on (0, s0), K > 2."""
    def gap(s):
        h = a * (s - 1) ** 2 + b * (1 / s + s - 2)
        h2 = a * (s / 2 - 1) ** 2 + b * (2 / s + s / 2 - 2)
        return K * h - h2

    grid = np.geomspace(1e-10, 1.0, 2001)
    vals = gap(grid)
    bad = np.nonzero(vals < 0)[0]
    if bad.size == 0:
        return 1.0
    i = bad[0]
    if i == 0:
        raise InvalidParams("doubling bound fails at the smallest sample")
    return float(brentq(gap, grid[i - 1], grid[i], xtol=1e-15))


def build_general_law(q1: float, q2_target: float = 0.0, K: float = 2.5) -> GeneralLaw:
    """Canonical shear-compatible law with growth constant ``q1``.

    With ``a = q1`` and ``b = q2_target + 2 q1`` one has
    ``h'(s) = 2a s + (b - 2a) - b/s^2 <= 2 q1 s + q2_target`` for s > 1.
    """
    if not q1 > 0:
        raise InvalidParams("need q1 > 0")
    if not K > 2:
        raise InvalidParams("doubling constant must exceed the asymptotic ratio 2")
    a = float(q1)
    b = float(q2_target + 2.0 * q1)
    if not b > 0:
        raise InvalidParams("q2_target + 2*q1 must be positive so that h blows up at 0+")
    s0 = _doubling_radius(a, b, K)
    return GeneralLaw(a=a, b=b, q1=float(q1), q2=float(q2_target), K=float(K), s0=s0)


# "reference" admits no positive connector, so building it raises InfeasibleLaw;
# it is kept as a preset so that the feasibility check has a standing example.
PRESETS: dict[str, dict] = {
    "default": dict(c1=0.5, c2=2.0, l=0.1, m=0.05, theta1=0.2),
    "steep": dict(c1=0.25, c2=2.0, l=0.2, m=0.02, theta1=0.3),
    "reference": dict(c1=0.5, c2=2.0, l=1.0, m=0.1, theta1=2.2),
}


def preset_law(name: str = "default") -> PaperLaw:
    try:
        params = PRESETS[name]
    except KeyError:
        raise InvalidParams(f"unknown law preset {name!r}") from None
    return build_paper_law(name=name, **params)


def law_table(law, s_min: float = 1e-4, s_max: float = 1e2, n: int = 200) -> np.ndarray:
    """Rows (s, h(s), h'(s)) on a log-spaced grid."""
    s = np.geomspace(s_min, s_max, n)
    return np.column_stack([s, law.eval(s), law.eval_prime(s)])
