"""Command-line entry point.

meshmac run --preset rate_sweep_300 --out results/rates300 --parallel 4
meshmac run --scenario my_sweep.toml --out results/mine --artifacts
meshmac replay --manifest results/rates300/manifest.json --out results/check
meshmac presets
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import MeshMacError
from .scenario import list_presets, load_preset, load_scenario
from .sweep import replay, run_sweep


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meshmac",
        description="Mesh MAC simulator: contention, scheduled, and grouped-hybrid access.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a scenario sweep")
    src = run_p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", help="path to a scenario TOML file")
    src.add_argument("--preset", help="name of a bundled scenario")
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--parallel", type=int, default=1, help="worker processes")
    run_p.add_argument(
        "--artifacts",
        action="store_true",
        help="also write per-run topology/grouping/schedule JSON",
    )

    rep_p = sub.add_parser("replay", help="re-execute a recorded manifest")
    rep_p.add_argument("--manifest", required=True, help="path to manifest.json")
    rep_p.add_argument("--out", required=True, help="output directory")
    rep_p.add_argument("--parallel", type=int, default=1, help="worker processes")

    sub.add_parser("presets", help="list bundled scenarios")
    return parser


def main(argv: "list[str] | None" = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "presets":
            for name in list_presets():
                print(name)
            return 0
        if args.command == "run":
            sc = load_preset(args.preset) if args.preset else load_scenario(args.scenario)
            result = run_sweep(sc, args.out, parallel=args.parallel, artifacts=args.artifacts)
            print(f"{len(result.rows)} cells -> {result.out_dir / 'summary.csv'}")
            return 0
        if args.command == "replay":
            result = replay(args.manifest, args.out, parallel=args.parallel)
            print(f"{len(result.rows)} cells -> {result.out_dir / 'summary.csv'}")
            return 0
    except MeshMacError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
