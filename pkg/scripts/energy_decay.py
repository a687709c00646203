"""Discrete energy of an unforced run from random initial data with homogeneous boundary data."""
import argparse

import numpy as np

from fpsi.assembly import assemble_system, build_coupled_spaces, collect_bcs
from fpsi.fespace import dirichlet_bcs
from fpsi.mms import WALLS, ManufacturedCase, level_mesh
from fpsi.system import BackwardEuler, EnergyFunctional, TransientState

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--level", type=int, default=1)
    ap.add_argument("--tau", type=float, default=0.05)
    ap.add_argument("--steps", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    mesh = level_mesh(args.level)
    spaces = build_coupled_spaces(mesh)
    mat = ManufacturedCase(theta=0.0).materials()
    bcs = [(n, dirichlet_bcs(getattr(spaces, n), WALLS, 0.0)) for n in ("u_f", "u_r", "y_s")]
    stepper = BackwardEuler(assemble_system(spaces, mat), args.tau, bcs)
    X = np.random.default_rng(args.seed).uniform(-1, 1, spaces.dimension)
    X[collect_bcs(spaces, bcs, 0.0)[0]] = 0.0
    state, energy = TransientState(0.0, X), EnergyFunctional(spaces, mat)
    zero = np.zeros(spaces.dimension)
    for n in range(args.steps + 1):
        print(f"{n:4d}  t = {state.t:6.3f}  E = {energy(state):.10e}")
        state = stepper.step(state, zero)
