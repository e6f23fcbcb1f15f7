"""Energy-conservation indicators e_0, e_5, e_10 under mesh refinement.

Five stacked circles (radius 0.75, period 4) at omega = 0.95, theta = 85 deg.

    python scripts/refinement_ladder.py --elements 40 80 160 320
"""

import argparse
import math
import time

from gratingsweep.bem import ScattererSpec, build_mesh, solve_derivatives
from gratingsweep.farfield import accuracy_indicator, far_coeffs, transmittance
from gratingsweep.greens import LatticeParams


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--elements", type=int, nargs="+", default=[40, 80, 160, 320])
    ap.add_argument("--omega", type=float, default=0.95)
    ap.add_argument("--theta", type=float, default=85.0)
    ap.add_argument("--order", type=int, default=10)
    args = ap.parse_args()

    params = LatticeParams(4.0, 1.0, math.radians(args.theta))
    orders = sorted({0, args.order // 2, args.order})
    print(f"{'per circle':>10} {'total':>6} " + " ".join(f"{'e_' + str(i):>10}" for i in orders) + f" {'time/s':>8}")
    for ne in args.elements:
        mesh = build_mesh([ScattererSpec((2.0, 4.0 * i), 0.75, ne) for i in range(5)], 4.0)
        t0 = time.perf_counter()
        res = solve_derivatives(mesh, args.omega, args.order, params)
        ff = far_coeffs(res, mesh, params)
        transmittance(ff, params.theta)
        e = [accuracy_indicator(ff, i) for i in orders]
        print(f"{ne:>10} {mesh.size:>6} " + " ".join(f"{v:>10.3e}" for v in e) + f" {time.perf_counter() - t0:>8.1f}")


if __name__ == "__main__":
    main()
