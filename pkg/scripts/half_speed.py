"""Normal transport along an equator arc of the Cheeger soul: rotation angle against arc length."""

import argparse

import numpy as np

from soulgeom.metrics import MetricModel
from soulgeom.transport import GreatCircleArc, SoulNormalBundle, transport_along


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--points", type=int, default=9)
    args = ap.parse_args()
    bundle = SoulNormalBundle(MetricModel("cheeger_so3"))
    print(f"{'arc':>8} {'rotation':>10} {'ratio':>8}")
    for psi in np.linspace(0.25, 2 * np.pi - 0.25, args.points):
        arc = GreatCircleArc.from_direction([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], psi)
        Q = transport_along(bundle, [arc], np.eye(3))
        angle = np.arctan2(Q[1, 0], Q[0, 0]) % (2 * np.pi)
        print(f"{psi:8.4f} {angle:10.6f} {angle / psi:8.5f}")


if __name__ == "__main__":
    main()
