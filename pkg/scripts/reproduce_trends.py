"""Run the three headline experiments on the pinned benchmark and print the comparisons.

    python scripts/reproduce_trends.py --out results --jobs 4
"""

import argparse
import csv
from pathlib import Path

from lowres.cli import run


def summary(path):
    with open(path / "summary.csv", newline="") as fh:
        return list(csv.DictReader(fh))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="results")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    out = Path(args.out)
    common = ["--jobs", str(args.jobs), "--seed", str(args.seed)]

    plan = [
        ("compare-criteria", "criteria", ["-R", "50"]),
        ("fogip-compare", "fogip", ["-R", "30", "--set", "fogip.n=10"]),
        ("stop-analysis", "stops", ["-R", "50"]),
    ]
    for command, name, extra in plan:
        code = run([command, "--out", str(out / name), *common, *extra])
        if code:
            raise SystemExit(code)

    print("\naccuracy by stopping scheme (mean over 50 repetitions)")
    for row in summary(out / "criteria"):
        print(f"  {row['criterion']:>4} {row['trn_val']:>6}  {row['accuracy_mean']} +- {row['accuracy_std']}"
              f"  stop {row['stop_epoch_mean']}")
    print("\ngood-init gain (points)")
    for row in summary(out / "fogip"):
        if row["init"] == "improvement":
            print(f"  {row['criterion']:>4}  {row['accuracy_mean']} (paired std {row['accuracy_std']})")
    print("\nstop points")
    for row in summary(out / "stops"):
        print(f"  {row['criterion']:>9}  acc {row['accuracy_mean']}  ece {row['ece_mean']}"
              f"  epoch {row['stop_epoch_mean']}")


if __name__ == "__main__":
    main()
