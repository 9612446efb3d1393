#!/usr/bin/env python3
"""Run every bundled preset into one results tree.

Usage:
    python scripts/run_all_presets.py --out results [--parallel N] [--only NAME ...]
"""

import argparse
import logging
import time
from pathlib import Path

from meshmac.scenario import list_presets, load_preset
from meshmac.sweep import run_sweep


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="root output directory")
    parser.add_argument("--parallel", type=int, default=1, help="worker processes")
    parser.add_argument("--artifacts", action="store_true",
                        help="also write per-run topology/grouping/schedule JSON")
    parser.add_argument("--only", nargs="*", default=None,
                        help="subset of preset names (default: all)")
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    names = args.only if args.only else list_presets()
    root = Path(args.out)
    for name in names:
        sc = load_preset(name)
        t0 = time.monotonic()
        result = run_sweep(sc, root / name, parallel=args.parallel,
                           artifacts=args.artifacts)
        print(f"{name}: {len(result.rows)} cells in {time.monotonic() - t0:.1f}s "
              f"-> {result.out_dir / 'summary.csv'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
