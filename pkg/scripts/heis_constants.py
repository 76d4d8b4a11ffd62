"""Estimate the Heisenberg comparison constants K and K/kappa with both bounds.

usage: python scripts/heis_constants.py [--degrees 4 8 12 16 20 24] [--upper-degree 12]
"""
import argparse
import json

from heatmetric import heisenberg as hz


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--degrees", type=int, nargs="+", default=[4, 8, 12, 16, 20, 24])
    ap.add_argument("--upper-degree", type=int, default=12)
    ap.add_argument("--out", default="heis_constants.json")
    args = ap.parse_args()
    rep = hz.estimate_constants(tuple(args.degrees), args.upper_degree)
    d = rep.to_dict()
    print(json.dumps({"K_lower": rep.K_lower, "Kk_ratio": rep.Kk_ratio, "monotone": rep.monotone()},
                     indent=2, default=float))
    with open(args.out, "w") as fh:
        json.dump(d, fh, indent=2, default=float)


if __name__ == "__main__":
    main()
