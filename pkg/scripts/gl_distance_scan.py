"""Maximal distance of the GL(2,3) attractor to the heteroclinic cycle over a grid of h2 values.

    python3 scripts/gl_distance_scan.py --h1 0.92 --h2 0.0005 0.001 0.002 0.0028 0.004 --t-max 30000
"""

import argparse
import csv
import sys

from pseudosimple.dynamics import IntegratorConfig, SweepProtocol, sweep
from pseudosimple.fields import GLParametrization, gl23_cubic


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--h1", type=float, nargs="+", default=[0.92])
    ap.add_argument("--h2", type=float, nargs="+", default=[0.001, 0.0015, 0.002, 0.0028])
    ap.add_argument("--t-max", type=float, default=30000.0)
    ap.add_argument("--scale", type=float, default=0.02, help="size of the random offset from the kappa2 midpoint")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    grid = [{"h1": h1, "h2": h2} for h1 in args.h1 for h2 in args.h2]
    proto = SweepProtocol(config=IntegratorConfig(t_max=args.t_max), scale=args.scale, seed=args.seed)
    rows = sweep(lambda g: gl23_cubic(GLParametrization(g["h1"], g["h2"])), grid, proto, threads=args.threads)
    cols = ["h1", "h2", "kind", "period", "min_dist", "max_dist", "return_mismatch"]
    w = csv.DictWriter(sys.stdout, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    w.writerows(rows)


if __name__ == "__main__":
    main()
