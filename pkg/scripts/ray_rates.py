"""Stationary mass along the q3 ray and its exponential rate.

Prints log pi(n v)/n for the non-halting machine at several p, the cycle
split at each n, and the reference ray formulas next to the enumerated
values.

    python scripts/ray_rates.py --n-max 12
"""

import argparse
import csv
import math
import sys
from fractions import Fraction

from orthwalk.machine import halting_machine, looping_machine
from orthwalk.reduction import compile_extended
from orthwalk.stationary import conditional_cycles, ldrate, ray_closed_form


def unit_ray(walk):
    v = [0] * walk.dimension
    v[walk.layout.q3] = 1
    return v


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n-max", type=int, default=12)
    ap.add_argument("--ps", default="1/4,1/2,3/4")
    args = ap.parse_args()
    out = csv.writer(sys.stdout, lineterminator="\n")

    out.writerow(["p", "n", "pi", "log_pi_over_n", "log_p", "prob_In", "E_R_given_In", "closed_form_pi", "closed_form_E_R_given_In"])
    for text in args.ps.split(","):
        p = Fraction(text)
        walk = compile_extended(looping_machine(), p, with_q3=True)
        rep = ldrate(walk, unit_ray(walk), args.n_max)
        for n, pi, rate in rep.points:
            cyc = conditional_cycles(walk, n)
            cf = ray_closed_form(p, n)
            out.writerow([p, n, pi, f"{rate:.6f}", f"{math.log(p):.6f}", cyc.prob_In, cyc.E_R_given_In, cf["pi"], cf["E_R_given_In"]])
        print(f"# p={p}: fitted slope {rep.slope_estimate:.6f}", file=sys.stderr)

    walk = compile_extended(halting_machine(), Fraction(1, 2), with_q3=True)
    rep = ldrate(walk, unit_ray(walk), args.n_max)
    print(f"# halting machine: infinite={rep.infinite} zero_from={rep.zero_from}", file=sys.stderr)


if __name__ == "__main__":
    main()
