"""Spatial convergence study with the manufactured solution; writes a CSV and prints final-pair rates."""
import argparse
import logging

from fpsi.io import write_csv
from fpsi.mms import VARIABLES, spatial_convergence_study

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--levels", type=int, default=4)
    ap.add_argument("--output", default="convergence_space.csv")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO)
    report = spatial_convergence_study(args.levels)
    write_csv(report, args.output)
    for v in VARIABLES:
        print(f"{v:>4}: errors {' '.join(f'{e:.3e}' for e in report.errors(v))}  final rate {report.rates(v)[-1]:.3f}")
