"""Vertical-plane sectional curvatures at a soul point of the Cheeger example, over the angle to W."""

import argparse

import numpy as np

from soulgeom.curvature import vertical_formula, vertical_plane_curvature
from soulgeom.metrics import MetricModel
from soulgeom.rigidity import soul_jets, soul_point


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=11, help="grid size on [0, pi/2]")
    ap.add_argument("--soul-point", type=float, nargs=3, default=[0.3, -0.4, 0.8])
    args = ap.parse_args()
    soul = soul_jets(MetricModel("cheeger_so3"), soul_point(args.soul_point))
    X, _ = soul.frame()
    W, U, V, _ = soul.normal_frame(X)
    lift = lambda e: np.r_[0.0, 0.0, e]
    print(f"{'theta':>8} {'engine':>12} {'formula':>12}")
    for theta in np.linspace(0.0, np.pi / 2, args.points):
        k = vertical_plane_curvature(soul.packet, lift(W), lift(U), lift(V), theta)
        print(f"{theta:8.4f} {k:12.8f} {vertical_formula(theta):12.8f}")


if __name__ == "__main__":
    main()
