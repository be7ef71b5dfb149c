"""Radial squeeze energy against the shooting-ODE reference under mesh refinement.

    python3 scripts/refinement_study.py [--sizes 16,32,64,128]
"""
import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from oracles import radial_oracle_energy  # noqa: E402
from twistreg.elastic import EnergyConfig  # noqa: E402
from twistreg.grid import make_mesh  # noqa: E402
from twistreg.laws import preset_law  # noqa: E402
from twistreg.minimizer import BOUNDARY_PRESETS, initial_field, minimize  # noqa: E402


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="16,32,64,128")
    ap.add_argument("--law", default="default")
    args = ap.parse_args()
    cfg = EnergyConfig(1.0, preset_law(args.law))
    ref = radial_oracle_energy(cfg.law, cfg.lam, 1.0)
    bd = BOUNDARY_PRESETS["radial_squeeze"]
    print(f"reference energy {ref:.10f}")
    print("n,iterations,energy,rel_error,min_det")
    for n in (int(s) for s in args.sizes.split(",")):
        mesh = make_mesh("disc", n)
        res = minimize(mesh, initial_field(mesh, bd, "analytic"), bd, cfg)
        print(f"{n},{res.iterations},{res.energy:.10f},{(res.energy - ref) / ref:.3e},{res.min_det:.6f}")


if __name__ == "__main__":
    main()
