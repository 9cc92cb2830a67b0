"""Run every figure recipe at its default size and write results under ``results/``.

Usage: python scripts/reproduce_figures.py [--only fig2b fig4] [--jobs 1] [--out results]
"""

import argparse
import time
from pathlib import Path

from ucsma.runner import FIGURES, run_figure


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--only", nargs="*", choices=FIGURES)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="results")
    args = p.parse_args()
    for name in args.only or FIGURES:
        t0 = time.time()
        sweep = run_figure(name, out_dir=Path(args.out) / name, jobs=args.jobs)
        print(f"{name}: {len(sweep.rows)} rows in {time.time() - t0:.0f}s")
        for key in ("fit", "fits"):
            if key in sweep.meta:
                print(f"  {key}: {sweep.meta[key]}")


if __name__ == "__main__":
    main()
