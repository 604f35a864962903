"""Check halfspace and hull cells agree on seeded perturbed-convex instances.

    python3 scripts/equivalence_sweep.py [--n 50] [--h 0.125]
"""

import argparse
import time

from discrete_ma.envelope import lower_hull
from discrete_ma.experiments import test_function
from discrete_ma.lattice import Box, build_domain
from discrete_ma.measure import discrete_measure
from discrete_ma.subdiff import equivalence_check, hull_cells, union_volume


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=50)
    ap.add_argument("--h", type=float, default=0.125)
    ap.add_argument("--stencil", type=int, default=2)
    args = ap.parse_args()
    dom = build_domain(Box((-1.0, -1.0), (1.0, 1.0)), args.h, args.stencil)
    print("seed,contact,max_hausdorff,total_mass,union_volume,rel_gap,seconds")
    for seed in range(args.n):
        t0 = time.perf_counter()
        u = test_function(f"random-convex({seed})").mesh(dom)
        hull = lower_hull(u)
        worst = max(equivalence_check(u, hull, i).hausdorff for i in range(dom.n_interior))
        cells, contact = hull_cells(u, hull)
        mass = discrete_measure(u, hull).total
        union = union_volume(cells, seed=seed)
        dt = time.perf_counter() - t0
        print(f"{seed},{contact.sum()},{worst:.3e},{mass:.8f},{union:.8f},{abs(mass - union) / mass:.2e},{dt:.2f}")


if __name__ == "__main__":
    main()
