"""Command-line front end.

    twistreg COMMAND [--config PATH] [--out DIR] [--seed N] [--threads N]

Configs are flat ``key = value`` files; unknown keys are rejected. Every
command writes ``summary.txt`` plus its CSVs into ``--out`` and exits 0 when
all of its checks pass, 1 when some fail, 2 on a bad config and 3 when a
numerical routine raises.
"""
from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .elastic import EnergyConfig, VariationSpec, check_variation_bounds
from .errors import InfeasibleLaw, InvalidParams, TwistregError
from .grid import adjugate, det2, make_mesh
from .io import read_config, write_csv, write_summary
from .laws import build_general_law, law_table, preset_law
from .minimizer import BOUNDARY_PRESETS, TRACE_HEADER, SolveSettings, initial_field, minimize
from .regularity import (caccioppoli_ratio, dirichlet_growth, growth_lemma_check, poincare_annulus_check,
                         power_case, random_field, recursive_case)
from .shear import (PROFILE_PRESETS, boundary_from_profiles, build_shear_variation, minimize_shear,
                    shear_energy, shear_inequality_probe, xi_fields, xi_holder_diagnostics)
from .twist import Ball, equivalence_probe, penalty, star_profile, twist_field


@dataclass
class RunConfig:
    experiment: str = "run"
    domain: str = "square"  # square | disc
    n: int = 128
    radius: float = 1.0
    lam: float = 1.0
    law: str = "default"  # law preset name
    boundary: str = "identity"
    dirichlet: str = "full"  # full | top_bottom
    init: str = "harmonic"  # harmonic | analytic
    max_iters: int = 5000
    grad_tol: float = 1e-8
    centers_n: int = 3  # lattice of centers_n x centers_n points
    centers_span: float = 0.25  # lattice spacing, centred at the origin
    r_prime: float = 0.3
    var_r: float = 0.1
    radii_count: int = 16
    n_theta: int = 256
    eps_ladder: str = "-1e-2,-1e-3,-1e-4"
    star_radius: float = 0.2
    holder_rmax: float = 0.5
    cacc_radii: str = "0.05,0.1,0.15"
    cacc_cap: float = 10.0
    corpus_size: int = 50
    poincare_r: float = 0.2
    slope_tol: float = 1e-5
    shear_profile: str = "oscillatory"
    shear_M: float = 1.0
    shear_q1: float = 1.0
    seed: int = 0

    @classmethod
    def from_pairs(cls, pairs: dict[str, str]) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for k, v in pairs.items():
            if k not in known:
                raise InvalidParams(f"unknown config key {k!r}")
            typ = known[k].type
            try:
                kwargs[k] = int(v) if typ == "int" else float(v) if typ == "float" else v
            except ValueError:
                raise InvalidParams(f"bad value for {k}: {v!r}") from None
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.boundary not in BOUNDARY_PRESETS:
            raise InvalidParams(f"unknown boundary preset {self.boundary!r}")
        if self.shear_profile not in PROFILE_PRESETS:
            raise InvalidParams(f"unknown shear profile {self.shear_profile!r}")
        if self.domain not in ("square", "disc"):
            raise InvalidParams(f"unknown domain {self.domain!r}")
        preset_law(self.law)
        if self.dirichlet not in ("full", "top_bottom"):
            raise InvalidParams(f"unknown dirichlet mode {self.dirichlet!r}")
        if self.init not in ("harmonic", "analytic"):
            raise InvalidParams(f"unknown initialisation {self.init!r}")
        for name in ("n", "centers_n", "radii_count", "n_theta", "corpus_size"):
            if getattr(self, name) < 1:
                raise InvalidParams(f"{name} must be at least 1")
        for name in ("radius", "lam", "grad_tol", "r_prime", "var_r", "star_radius", "holder_rmax",
                     "poincare_r", "slope_tol", "shear_q1"):
            if not getattr(self, name) > 0:
                raise InvalidParams(f"{name} must be positive")
        if self.max_iters < 0 or self.centers_span < 0 or self.shear_M < 0:
            raise InvalidParams("max_iters, centers_span and shear_M must be nonnegative")
        try:
            ladder = self.ladder
            [float(x) for x in self.cacc_radii.split(",")]
        except ValueError:
            raise InvalidParams("eps_ladder and cacc_radii must be comma-separated numbers") from None
        if not all(-0.5 < e < 0 for e in ladder):
            raise InvalidParams("eps_ladder entries must lie in (-1/2, 0)")

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    @property
    def ladder(self) -> tuple[float, ...]:
        return tuple(float(x) for x in self.eps_ladder.split(","))

    def centers(self) -> list[tuple[float, float]]:
        k = np.arange(self.centers_n) - (self.centers_n - 1) / 2.0
        return [(float(a * self.centers_span), float(b * self.centers_span)) for b in k for a in k]


class Report:
    """Collects summary items and named pass/fail checks for one command."""

    def __init__(self):
        self.items: dict = {}
        self.failures: list[str] = []

    def check(self, name: str, ok: bool, detail: str = "") -> None:
        self.items[f"check.{name}"] = "PASS" if ok else "FAIL"
        if not ok:
            self.failures.append(f"{name}: {detail}" if detail else name)


def _mesh(cfg: RunConfig, n: int | None = None):
    return make_mesh(cfg.domain, cfg.n if n is None else n, cfg.radius, cfg.dirichlet)


def _settings(cfg: RunConfig) -> SolveSettings:
    return SolveSettings(max_iters=cfg.max_iters, grad_tol=cfg.grad_tol)


def _solve(cfg: RunConfig):
    mesh = _mesh(cfg)
    econf = EnergyConfig(cfg.lam, preset_law(cfg.law))
    bd = BOUNDARY_PRESETS[cfg.boundary]
    res = minimize(mesh, initial_field(mesh, bd, cfg.init), bd, econf, _settings(cfg))
    return mesh, econf, res


# -- commands -------------------------------------------------------------------

def cmd_build_law(cfg: RunConfig, out: Path, rep: Report) -> None:
    law = preset_law(cfg.law)
    inv = law.invariant_report()
    for name, ok in inv["checks"].items():
        rep.check(name, bool(ok))
    rep.items.update({"c1": law.c1, "c2": law.c2, "l": law.l, "m": law.m, "theta1": law.theta1,
                      "psi1_a": law.psi1_coeffs[0], "psi1_b": law.psi1_coeffs[1],
                      "psi2_a": law.psi2_coeffs[0], "psi2_b": law.psi2_coeffs[1]})
    write_csv(out / "law.csv", "s,h,h_prime", law_table(law), cfg.as_dict(), "build-law")


def cmd_minimize(cfg: RunConfig, out: Path, rep: Report) -> None:
    mesh, econf, res = _solve(cfg)
    rep.items.update({"status": res.status, "iterations": res.iterations, "energy": res.energy,
                      "grad_norm": res.grad_norm, "min_det": res.min_det})
    rep.check("converged", res.status == "converged", res.status)
    rep.check("feasible", res.min_det > 0, f"min det {res.min_det:.3e}")
    energies = [row[1] for row in res.trace]
    rep.check("energy_monotone", all(b <= a for a, b in zip(energies, energies[1:])))
    c = cfg.as_dict()
    write_csv(out / "field.csv", "x,y,u1,u2", np.column_stack([mesh.points, res.field]), c, "minimize")
    write_csv(out / "trace.csv", TRACE_HEADER, res.trace, c, "minimize")
    F = mesh.gradient(res.field)
    write_csv(out / "elements.csv", "cx,cy,det,grad11,grad12,grad21,grad22",
              np.column_stack([mesh.centroids, det2(F), F.reshape(-1, 4)]), c, "minimize")


def cmd_twist_report(cfg: RunConfig, out: Path, rep: Report) -> None:
    mesh, econf, res = _solve(cfg)
    u = res.field
    region = Ball((0.0, 0.0), cfg.centers_span)
    pen = penalty(mesh, u, region, cfg.r_prime)
    rep.items.update({"penalty": pen.value, "centers": len(pen.centers),
                      "violating_centers": int(pen.violating.sum())})
    rep.check("penalty_zero", pen.value == 0.0, f"F = {pen.value:.6e}")
    c = cfg.as_dict()
    write_csv(out / "penalty.csv", "x0x,x0y,violation", pen.rows(), c, "twist-report")
    rows = []
    for x0 in cfg.centers():
        prof = star_profile(mesh, u, x0, cfg.star_radius, cfg.n_theta)
        rows += [(x0[0], x0[1], *r) for r in prof.rows()]
        rep.check(f"star[{x0[0]:+.3f},{x0[1]:+.3f}]", prof.star_shaped, f"margin {prof.margin:.3e}")
    write_csv(out / "star.csv", "x0x,x0y,theta,rho,sigma", rows, c, "twist-report")


def cmd_star_check(cfg: RunConfig, out: Path, rep: Report) -> None:
    mesh, econf, res = _solve(cfg)
    rows = []
    total = {"both_ok": 0, "twist_only": 0, "star_only": 0, "both_flag": 0}
    for x0 in cfg.centers():
        eq = equivalence_probe(mesh, res.field, x0, cfg.r_prime, cfg.radii_count, cfg.n_theta)
        for k, v in eq.table.items():
            total[k] += v
        rows += [(x0[0], x0[1], R, t, s, a, b) for R, t, s, a, b in
                 zip(eq.radii, eq.shell_min_twist, eq.star_margin, eq.twist_ok, eq.star_ok)]
    n = sum(total.values())
    rep.items.update(total)
    rep.items["disagreement_rate"] = (total["twist_only"] + total["star_only"]) / n
    rep.check("agreement", total["twist_only"] + total["star_only"] == 0)
    write_csv(out / "equivalence.csv", "x0x,x0y,R,shell_min_twist,star_margin,twist_ok,star_ok",
              rows, cfg.as_dict(), "star-check")


def cmd_holder_fit(cfg: RunConfig, out: Path, rep: Report) -> None:
    mesh, econf, res = _solve(cfg)
    u = res.field
    c = cfg.as_dict()
    decay, summary, cacc = [], [], []
    for x0 in cfg.centers():
        prof = dirichlet_growth(mesh, u, x0, cfg.holder_rmax)
        decay += [(x0[0], x0[1], r, p) for r, p in prof.rows()]
        summary.append((x0[0], x0[1], prof.alpha, prof.residual))
        rep.check(f"alpha[{x0[0]:+.3f},{x0[1]:+.3f}]", prof.alpha > 0, f"alpha {prof.alpha:.3e}")
        for r in (float(x) for x in cfg.cacc_radii.split(",")):
            cr = caccioppoli_ratio(mesh, u, x0, r)
            cacc.append((x0[0], x0[1], r, cr.d_in, cr.d_ann, cr.ratio))
    worst = max(row[-1] for row in cacc)
    rep.items["alpha_min"] = min(row[2] for row in summary)
    rep.items["caccioppoli_max"] = worst
    rep.check("caccioppoli_bounded", worst <= cfg.cacc_cap, f"max ratio {worst:.3e}")
    rng = np.random.default_rng(cfg.seed)
    prows = []
    for k in range(cfg.corpus_size):
        x0 = rng.uniform(-0.4, 0.4, size=2)
        pr = poincare_annulus_check(mesh, random_field(mesh.points, rng), x0, cfg.poincare_r)
        prows.append((k, x0[0], x0[1], pr.lhs, pr.rhs, pr.holds))
    bad = sum(not row[-1] for row in prows)
    rep.items["poincare_violations"] = bad
    rep.check("poincare_corpus", bad == 0, f"{bad} violations")
    write_csv(out / "decay.csv", "x0x,x0y,r,phi", decay, c, "holder-fit")
    write_csv(out / "holder.csv", "x0x,x0y,alpha,residual", summary, c, "holder-fit")
    write_csv(out / "caccioppoli.csv", "x0x,x0y,r,d_in,d_ann,ratio", cacc, c, "holder-fit")
    write_csv(out / "poincare.csv", "k,x0x,x0y,lhs,rhs,holds", prows, c, "holder-fit")


def cmd_shear(cfg: RunConfig, out: Path, rep: Report) -> None:
    mesh = make_mesh("square", cfg.n, dirichlet=cfg.dirichlet)
    law = build_general_law(cfg.shear_q1)
    s0 = boundary_from_profiles(mesh, *PROFILE_PRESETS[cfg.shear_profile])
    sf = minimize_shear(mesh, s0, cfg.shear_M, cfg.lam, law, _settings(cfg))
    sigma, M = sf.sigma, sf.measured_M
    rep.items.update({"status": sf.solve.status, "iterations": sf.solve.iterations,
                      "energy": sf.solve.energy, "initial_energy": shear_energy(mesh, s0, cfg.lam, law),
                      "min_det": sf.min_det, "measured_M": M, "penalty_residual": sf.penalty_residual})
    rep.check("converged", sf.solve.status == "converged", sf.solve.status)
    rep.check("feasible", sf.min_det > 0)
    c = cfg.as_dict()
    probe_rows, xi_rows = [], []
    for x0 in cfg.centers():
        tag = f"[{x0[0]:+.3f},{x0[1]:+.3f}]"
        xf = xi_fields(mesh, sigma, x0, M)
        rep.check(f"supports{tag}", xf.violations_plus + xf.violations_minus == 0,
                  f"{xf.violations_plus}+{xf.violations_minus} elements")
        xi_rows += [(x0[0], x0[1], *r) for r in xf.rows(mesh)]
        for eps in (-0.4, -0.1, -0.01):
            for sign in (1, -1):
                try:
                    build_shear_variation(mesh, sigma, VariationSpec(x0, cfg.var_r, eps), sign, M)
                except TwistregError as exc:
                    rep.check(f"detbounds{tag}", False, str(exc))
        pr = shear_inequality_probe(mesh, sigma, x0, cfg.var_r, cfg.lam, law, M, cfg.ladder, cfg.slope_tol)
        for which, d in pr.items():
            probe_rows.append((x0[0], x0[1], which, d["lhs"], d["rhs"], d["max_slope"]))
            rep.check(f"slopes_{which}{tag}", d["slopes_ok"], f"max slope {d['max_slope']:.3e}")
    for h in xi_holder_diagnostics(mesh, sigma, cfg.centers(), M, cfg.holder_rmax):
        ok = h.alpha is not None and h.alpha > 0
        rep.check(f"xi_alpha[{h.x0[0]:+.3f},{h.x0[1]:+.3f}]", ok, f"alpha {h.alpha}")
    write_csv(out / "sigma.csv", "x,y,sigma", np.column_stack([mesh.points, sigma]), c, "shear")
    write_csv(out / "xi.csv", "x0x,x0y,x,y,xi_plus,xi_minus", xi_rows, c, "shear")
    write_csv(out / "shear_probe.csv", "x0x,x0y,sign,lhs,rhs,max_slope", probe_rows, c, "shear")


def cmd_verify(cfg: RunConfig, out: Path, rep: Report) -> None:
    rows = []

    def record(name, ok, value):
        rows.append((name, "PASS" if ok else "FAIL", value))
        rep.check(name, bool(ok), f"value {value}")

    law = preset_law(cfg.law)
    checks = law.invariant_report()["checks"]
    record("law_invariants", all(checks.values()), sum(map(bool, checks.values())))
    try:
        preset_law("reference")
        record("connector_infeasible_example", False, 0)
    except InfeasibleLaw:
        record("connector_infeasible_example", True, 1)

    rng = np.random.default_rng(cfg.seed)
    A = rng.normal(size=(200, 2, 2))
    err = np.abs(adjugate(A) @ A - det2(A)[:, None, None] * np.eye(2)).max()
    record("adjugate_identity", err <= 1e-12, float(err))

    mesh = make_mesh("square", 16)
    worst = 0.0
    for _ in range(20):
        M = rng.normal(size=(2, 2))
        if np.linalg.det(M) < 0:
            M[0] *= -1
        u = mesh.points @ M.T + rng.normal(size=2)
        t = twist_field(mesh, u, (0.1, -0.2))
        R = np.hypot(*(mesh.centroids - (0.1, -0.2)).T)
        worst = max(worst, float(np.nanmax(np.abs(t - np.linalg.det(M) * R))) / max(1.0, abs(np.linalg.det(M))))
    record("twist_affine", worst <= 1e-10, worst)

    for name, bd in (("identity", BOUNDARY_PRESETS["identity"]), ("stretch", BOUNDARY_PRESETS["stretch"])):
        u = bd.values(mesh.points)
        low = math.inf
        for eps in (-0.4, -0.1, -0.01):
            try:
                br = check_variation_bounds(mesh, u, VariationSpec((0.0, 0.0), 0.3, eps))
                low = min(low, br.lower_margin)
            except TwistregError:
                low = -math.inf
        record(f"variation_bounds_{name}", low >= -1e-9, low)

    for mu, p in ((0.5, 1.0), (0.75, 2.0), (0.9, 2.0)):
        g = growth_lemma_check(power_case(mu, p))
        record(f"growth_power_{mu}_{p}", g.min_slack >= 0 and g.alpha_prime == math.log2(1 / mu), g.min_slack)
        g = growth_lemma_check(recursive_case(mu, p))
        record(f"growth_recursive_{mu}_{p}", g.min_slack >= 0 and g.decay_exponent >= g.guaranteed_exponent - 0.05,
               g.decay_exponent)

    pm = make_mesh("square", 64)
    pr = poincare_annulus_check(pm, pm.points, (0.0, 0.0), 0.2)
    rel = pr.lhs / (7.5 * math.pi * 0.2**4)
    record("poincare_identity", abs(rel - 1.0) <= 0.05 and pr.holds, rel)

    sigma = rng.normal(size=mesh.n_points)
    gs = mesh.gradient(sigma)
    F = np.zeros((mesh.n_triangles, 2, 2))
    F[:, 0, 0] = 1.0
    F[:, 1] = gs
    F[:, 1, 1] += 1.0
    diff = np.abs((F * F).sum(axis=(1, 2)) - (2 + 2 * gs[:, 1] + (gs * gs).sum(axis=1))).max()
    record("shear_quadratic_identity", diff <= 1e-12, float(diff))
    write_csv(out / "verify.csv", "check,status,value", rows, cfg.as_dict(), "verify")


COMMANDS = {
    "build-law": cmd_build_law,
    "minimize": cmd_minimize,
    "twist-report": cmd_twist_report,
    "star-check": cmd_star_check,
    "holder-fit": cmd_holder_fit,
    "shear": cmd_shear,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="twistreg", description="Twist and regularity experiments on P1 meshes.")
    ap.add_argument("--version", action="version", version=f"twistreg {__version__}")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", type=Path, help="key = value file; defaults apply when omitted")
    ap.add_argument("--out", type=Path, default=Path("out"))
    ap.add_argument("--seed", type=int, help="overrides the seed key of the config")
    ap.add_argument("--threads", type=int, default=1, help="accepted for compatibility; runs are single-threaded")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    try:
        pairs = read_config(args.config) if args.config else {}
        if args.seed is not None:
            pairs["seed"] = str(args.seed)
        cfg = RunConfig.from_pairs(pairs)
    except (OSError, ValueError, InvalidParams, InfeasibleLaw) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        write_summary(out / "summary.txt", {"command": args.command, "status": "config_error",
                                            "failures": str(exc)}, {}, args.command)
        return 2
    rep = Report()
    code = 0
    try:
        COMMANDS[args.command](cfg, out, rep)
    except TwistregError as exc:
        rep.failures.append(f"{type(exc).__name__}: {exc}")
        rep.items["status"] = "error"
        code = 3
    if rep.failures and code == 0:
        code = 1
    items = {"command": args.command, "experiment": cfg.experiment, "exit_code": code,
             **rep.items, "failures": ";".join(rep.failures) or "none"}
    write_summary(out / "summary.txt", items, cfg.as_dict(), args.command)
    for f in rep.failures:
        print(f"FAIL {f}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
