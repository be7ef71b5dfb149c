"""Annulus Poincare ratios over a random smooth-field corpus.

    python3 scripts/poincare_corpus.py [--size 200] [--n 64] [--r 0.2] [--seed 0]
"""
import argparse

import numpy as np

from twistreg.grid import make_mesh
from twistreg.regularity import poincare_annulus_check, random_field


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=200)
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--r", type=float, default=0.2)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    mesh = make_mesh("square", args.n)
    rng = np.random.default_rng(args.seed)
    ratios, weighted = [], []
    for _ in range(args.size):
        x0 = rng.uniform(-0.4, 0.4, size=2)
        rep = poincare_annulus_check(mesh, random_field(mesh.points, rng), x0, args.r)
        ratios.append(rep.ratio)
        weighted.append(rep.lhs / rep.weighted_rhs)
    ratios = np.array(ratios)
    print(f"fields {args.size}  violations beyond slack {int(np.sum(ratios > 1.1))}")
    print(f"annulus ratio  max {ratios.max():.4f}  median {np.median(ratios):.4f}")
    print(f"weighted ratio max {max(weighted):.4f}")


if __name__ == "__main__":
    main()
