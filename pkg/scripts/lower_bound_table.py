"""Print t*, V and the sample lower bound for the Pareto instance at several deltas.

Solves in exact mode on quadrature laws and cross-checks against the simplex
lattice search.
"""

import argparse

import numpy as np

from klinf_bai import MomentClass
from klinf_bai.distributions import PARETO4_ARMS
from klinf_bai.lower_bound import brute_force_allocation, sample_lower_bound, solve_allocation


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--nodes", type=int, default=256, help="quadrature nodes per arm")
    ap.add_argument("--lattice", type=int, default=0, help="also run the lattice search at this size")
    args = ap.parse_args()

    mc = MomentClass("power", 9.0, 2.0)
    laws = [a.discretize(args.nodes) for a in PARETO4_ARMS]
    sol = solve_allocation(laws, mc)
    np.set_printoptions(precision=6, suppress=True)
    print(f"V = {sol.V:.10g}   c* = {sol.c_star:.10g}   solve {sol.solver_seconds:.2f}s")
    print(f"t* = {sol.t_star}")
    print(f"x_j = {sol.x_cross[1:]}")
    for delta in (0.1, 0.01, 0.001, 1e-8):
        print(f"delta = {delta:g}: lower bound {sample_lower_bound(delta=delta, V=sol.V):.2f}")
    if args.lattice:
        t, V = brute_force_allocation(laws, mc, grid_n=args.lattice)
        print(f"lattice {args.lattice}: V = {V:.6g}, t = {t}")


if __name__ == "__main__":
    main()
