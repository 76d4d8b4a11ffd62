"""Run the acceptance suite and write a JSON report next to the printed lines.

usage: python scripts/run_acceptance.py [--seed N] [--only 1 2 ...] [--out report.json]
"""
import argparse
import json
import sys

from heatmetric import acceptance


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--only", type=int, nargs="+")
    ap.add_argument("--out", default="acceptance_report.json")
    args = ap.parse_args()
    ctx = acceptance.Context(seed=args.seed)
    results = acceptance.run_all(ctx, args.only, echo=lambda s: print(s, flush=True))
    with open(args.out, "w") as fh:
        json.dump([r.to_dict() for r in results], fh, indent=2, default=float)
    n = sum(r.passed for r in results)
    print(f"{n}/{len(results)} criteria passed; report in {args.out}")
    return 0 if n == len(results) else 2


if __name__ == "__main__":
    sys.exit(main())
