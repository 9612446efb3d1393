#!/usr/bin/env python3
"""Explore how radio range maps to hidden-node exposure for a network size.

Usage:
    python scripts/calibration_report.py --n 300 --target 0.43 --seeds 1 2 3

Prints the calibrated radius per seed plus the probe trail, so scenario
authors can judge how tight a hidden target is before committing a sweep.
"""

import argparse

from meshmac.errors import TargetUnreachable
from meshmac.topology import calibrate_radius


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, required=True, help="node count")
    parser.add_argument("--area", type=float, default=100.0, help="square side")
    parser.add_argument("--target", type=float, required=True,
                        help="hidden-node level to calibrate toward, in [0, 1)")
    parser.add_argument("--tolerance", type=float, default=0.03)
    parser.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    parser.add_argument("--formula", default="receiver_centric",
                        choices=["receiver_centric", "as_written"])
    parser.add_argument("--probes", action="store_true", help="dump every probe")
    args = parser.parse_args()

    for seed in args.seeds:
        try:
            cal = calibrate_radius(
                args.n, args.area, seed, args.target,
                tolerance=args.tolerance, formula=args.formula,
            )
        except TargetUnreachable as exc:
            print(f"seed {seed}: unreachable; closest radius {exc.best_radius:.3f} "
                  f"achieves {exc.achieved:.3f}")
            continue
        print(f"seed {seed}: radius {cal.comm_radius:.3f} "
              f"achieves {cal.achieved:.3f} ({len(cal.probes)} probes)")
        if args.probes:
            for radius, hidden in cal.probes:
                print(f"    r={radius:8.3f} -> hidden={hidden:.3f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
