"""Compare default and greedily tuned hyper-parameters, both stopped by PE.

    python scripts/hyper_grid.py --out results/grid -R 10
"""

import argparse

from lowres.cli import run


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results/grid")
    ap.add_argument("-R", "--repetitions", type=int, default=10)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    raise SystemExit(run(["hyper-grid", "--out", args.out, "-R", str(args.repetitions),
                          "--jobs", str(args.jobs)]))


if __name__ == "__main__":
    main()
