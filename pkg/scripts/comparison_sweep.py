"""Randomised comparison sweep: f2 = f1 + |p + q x| on common random numbers.

Writes one CSV row per pair and prints the verdict counts.
"""

import argparse
from pathlib import Path

from jumpbsde.cli import REPORT_COLUMNS
from jumpbsde.comparison import sweep_report_summary
from jumpbsde.experiments import comparison_sweep
from jumpbsde.io import write_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pairs", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--paths", type=int, default=10_000)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="out/sweep")
    args = ap.parse_args()

    results = comparison_sweep(args.pairs, args.seed, n_paths=args.paths, workers=args.workers)
    rows = []
    for pair, rep in results:
        row = rep.csv_row()
        rows.append([row[k] for k in REPORT_COLUMNS] + [pair.terms2["abs_affine_x"]])
    cfg = {"pairs": args.pairs, "seed": args.seed, "n_paths": args.paths}
    path = write_csv(Path(args.out) / "sweep.csv", REPORT_COLUMNS + ["abs_affine_x"], rows,
                     args.seed, cfg)
    print(sweep_report_summary([r for _, r in results]))
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
