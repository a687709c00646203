"""Temporal convergence study (cumulative space-time errors) on a fixed mesh."""
import argparse
import logging

from fpsi.io import write_csv
from fpsi.mms import VARIABLES, temporal_convergence_study

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mesh-level", type=int, default=3)
    ap.add_argument("--tau0", type=float, default=0.5)
    ap.add_argument("--halvings", type=int, default=5)
    ap.add_argument("--output", default="convergence_time.csv")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO)
    report = temporal_convergence_study(args.mesh_level, args.tau0, args.halvings)
    write_csv(report, args.output)
    for v in VARIABLES:
        print(f"{v:>4}: errors {' '.join(f'{e:.4f}' for e in report.errors(v))}  rates {' '.join(f'{r:.3f}' for r in report.rates(v))}")
