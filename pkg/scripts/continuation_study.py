"""Double-limit continuation: eps sweep at fixed R and R sweep at fixed eps.

Prints consecutive H^1 differences; a Cauchy-like sequence should show them
shrinking.

    python scripts/continuation_study.py --out continuation.csv
"""

import argparse

from micropolar.config import single_mode
from micropolar.io import write_report
from micropolar.solver import SolverParams, continuation
from micropolar.spectral import SpectralVectorField, make_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=32)
    ap.add_argument("--L", type=float, default=8.0)
    ap.add_argument("--mode", type=int, default=4)
    ap.add_argument("--hm1", type=float, default=1e-2)
    ap.add_argument("--epsilons", type=float, nargs="+", default=[0.5, 0.25, 0.125])
    ap.add_argument("--radii", type=float, nargs="+", default=[1.0, 2.0, 3.0])
    ap.add_argument("--out", default="continuation.csv")
    args = ap.parse_args()

    grid = make_grid(args.n, args.L)
    f = single_mode(grid, [args.mode, 0, 0], hm1_norm=args.hm1)
    base = SolverParams(epsilon=args.epsilons[0], R_cut=2.0, f=f, g=SpectralVectorField.zeros(grid))
    rows = []
    for label, eps, radii in (("eps", args.epsilons, [2.0]), ("R", [0.5], args.radii)):
        for c in continuation(base, eps, radii):
            rows.append((label, c.R_cut, c.epsilon, c.converged, c.iterations, c.H1, c.H1_diff_prev, c.energy_gap))
            diff = "-" if c.H1_diff_prev is None else f"{c.H1_diff_prev:.3e}"
            print(f"{label:3s} R={c.R_cut:<4g} eps={c.epsilon:<6g} H1={c.H1:.8e} diff={diff}")
    cols = ("sweep", "R", "epsilon", "converged", "iterations", "H1", "H1_diff_prev", "energy_gap")
    write_report(args.out, (cols, rows))


if __name__ == "__main__":
    main()
