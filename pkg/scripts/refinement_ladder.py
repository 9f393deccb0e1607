"""Time-step refinement for the linear ODE driver f = -0.5 y, xi = 1.

Prints the median absolute error over the refinement seeds for each step
count; the explicit scheme should show first-order decay.
"""

import argparse

from jumpbsde.experiments import REFINEMENT_SEEDS, refinement_ladder


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, nargs="+", default=[25, 50, 100, 200, 400])
    ap.add_argument("--paths", type=int, default=10_000)
    args = ap.parse_args()

    ladder = refinement_ladder(args.steps, REFINEMENT_SEEDS, n_paths=args.paths)
    prev = None
    for n, row in ladder.items():
        ratio = "" if prev is None else f"  ratio {prev / row['median']:.3f}"
        print(f"n_steps={n:5d}  median error {row['median']:.3e}{ratio}")
        prev = row["median"]


if __name__ == "__main__":
    main()
