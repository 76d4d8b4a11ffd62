"""Tabulate R, A and the angle ratio on both cones and report the apex and far-field limits.

usage: python scripts/cone_tables.py [--outdir tables]
"""
import argparse
import json
import math
import os

from heatmetric import cone


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--outdir", default="tables")
    ap.add_argument("--t", type=float, nargs="+", default=[1.0])
    args = ap.parse_args()
    os.makedirs(args.outdir, exist_ok=True)
    summary = []
    for k in (2, 4):
        m = cone.tabulate(k)
        for t in args.t:
            path = os.path.join(args.outdir, f"cone_k{k}_t{t:g}.csv")
            with open(path, "w", newline="") as fh:
                fh.write(cone.metric_csv(m, t))
            ang = cone.apex_angle(k, t, m)
            far = cone.ratio_at(50.0 * math.sqrt(t), t, m)
            summary.append({"k": k, "t": t, "apex_limit": ang.limit,
                            "fit_residual": ang.fit_residual, "ratio_at_50": far, "csv": path})
            print(f"k={k} t={t:g}: apex ratio {ang.limit:.6f}, ratio(50 sqrt t) {far:.6f} -> {path}")
    with open(os.path.join(args.outdir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)


if __name__ == "__main__":
    main()
