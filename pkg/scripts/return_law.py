"""Return-time law of compiled walks: exact pmf, Kac mean and Monte Carlo side by side.

    python scripts/return_law.py --p 1/2 --episodes 200000
"""

import argparse
import csv
import sys
from fractions import Fraction

from orthwalk.machine import halting_machine, looping_machine
from orthwalk.reduction import compile_extended
from orthwalk.stationary import return_time


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--p", type=Fraction, default=Fraction(1, 2))
    ap.add_argument("--horizon", type=int, default=40)
    ap.add_argument("--episodes", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["machine", "p", "exact_mean", "pi_origin", "mc_mean", "mc_stderr", "z_score"])
    for name, make in (("halting", halting_machine), ("looping", looping_machine)):
        walk = compile_extended(make(), args.p)
        exact = return_time(walk, walk.origin, args.horizon)
        mc = return_time(walk, walk.origin, args.horizon * 50, "mc", args.episodes, args.seed)
        z = (mc.mc_mean - float(exact.mean_exact)) / mc.mc_stderr
        out.writerow([name, args.p, exact.mean_exact, exact.pi_estimate, f"{mc.mc_mean:.6f}", f"{mc.mc_stderr:.6f}", f"{z:+.2f}"])

    print()
    out.writerow(["machine", "t", "exact_prob"])
    for name, make in (("halting", halting_machine), ("looping", looping_machine)):
        walk = compile_extended(make(), args.p)
        for t, m in return_time(walk, walk.origin, 20).pmf_prefix:
            out.writerow([name, t, m])


if __name__ == "__main__":
    main()
