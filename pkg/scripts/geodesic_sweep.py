"""Sweep the angular separation between two cone points and record d_t and the winning branch.

usage: python scripts/geodesic_sweep.py [--k 2] [--r 1.0] [--n 13] [--out sweep.csv]
"""
import argparse
import csv
import math

import numpy as np

from heatmetric import cone, geodesics
from heatmetric.measures import ConePoint


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", type=int, choices=(2, 4), default=2)
    ap.add_argument("--r", type=float, default=1.0)
    ap.add_argument("--t", type=float, default=1.0)
    ap.add_argument("--n", type=int, default=13)
    ap.add_argument("--out", default="sweep.csv")
    args = ap.parse_args()
    m = cone.tabulate(args.k)
    period = 2 * math.pi / args.k  # the cone angle
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha", "distance", "branch"])
        for a in np.linspace(0.0, period / 2, args.n):
            res = geodesics.distance(ConePoint(args.r, 0.0, args.k), ConePoint(args.r, float(a), args.k),
                                     m, args.t)
            w.writerow([f"{a:.12e}", f"{res.distance:.12e}", res.branch])
            print(f"alpha {a:.4f}: d = {res.distance:.6f} ({res.branch})")


if __name__ == "__main__":
    main()
