"""Labeled-fraction sweep: good init + PE against Val-based stopping with two dropout rates.

    python scripts/size_sweep.py --out results/sweep -R 20
"""

import argparse

from lowres.cli import run


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results/sweep")
    ap.add_argument("-R", "--repetitions", type=int, default=20)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--fractions", default="0.005, 0.01, 0.02, 0.05")
    args = ap.parse_args()
    raise SystemExit(run([
        "size-sweep", "--out", args.out, "-R", str(args.repetitions), "--jobs", str(args.jobs),
        # the pool fraction is taken of the whole synthetic set
        "--set", f"sweep.fractions={args.fractions}",
    ]))


if __name__ == "__main__":
    main()
