#!/usr/bin/env python3
"""Scan the crossover time t1 and the envelope rates over a viscosity range.

    python3 scripts/crossover_scan.py --nu-min 1e-10 --nu-max 1e-2
"""

import argparse
import sys

import numpy as np

from vvlab.envelope import OsgoodParams, Regime, crossover_time, theorem_rate


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--nu-min", type=float, default=1e-10)
    ap.add_argument("--nu-max", type=float, default=1e-2)
    ap.add_argument("--points", type=int, default=9)
    ap.add_argument("--c", type=float, default=1.0)
    ap.add_argument("--t-fixed", type=float, default=1.0)
    args = ap.parse_args(argv)

    print(f"{'nu':>10} {'t1':>12} {'t1*log(1/nu)':>14} {'residual':>10} "
          f"{'sqrt(nu t1)':>12} {'fixed-t rate':>12}")
    for nu in np.geomspace(args.nu_min, args.nu_max, args.points):
        res = crossover_time(OsgoodParams(c=args.c, nu=float(nu)))
        short = theorem_rate(res.t1, float(nu), args.c, Regime.SHORT_TIME)
        fixed = theorem_rate(args.t_fixed, float(nu), args.c, Regime.FIXED_TIME)
        print(
            f"{nu:>10.1e} {res.t1:>12.6f} {res.t1 * np.log(1 / nu):>14.4f} "
            f"{res.residual:>10.1e} {short.value:>12.4e} {fixed.value:>12.4e}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
