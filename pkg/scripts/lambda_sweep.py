"""Curvature norm and holonomy-algebra dimension across the connection family."""

import argparse

import numpy as np

from soulgeom.connection import BaseMap, lambda_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lo", type=float, default=-3.0)
    ap.add_argument("--hi", type=float, default=1.0)
    ap.add_argument("--points", type=int, default=17)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    p = rng.standard_normal(3)
    p /= np.linalg.norm(p)
    X = np.cross(p, rng.standard_normal(3))
    X /= np.linalg.norm(X)
    Y = np.cross(p, X)
    rows = lambda_sweep(BaseMap(), np.linspace(args.lo, args.hi, args.points), p, X, Y, seed=args.seed)
    print(f"{'lambda':>8} {'|R|':>10} {'dim':>4}")
    for r in rows:
        print(f"{r.lam:8.3f} {r.curvature_norm:10.6f} {r.holonomy_dim:4d}")


if __name__ == "__main__":
    main()
