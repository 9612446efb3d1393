#!/usr/bin/env python3
"""Plot throughput/delivery curves and collision distributions from a sweep.

Usage:
    python scripts/plot_summary.py results/rate_sweep_300 [--out plots/]

Reads summary.csv and cdf_<mode>.csv from the sweep directory and writes
one PNG per figure. Seeds are aggregated as mean with 95% error bars.
"""

import argparse
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from meshmac.metrics import mean_ci

MODE_STYLE = {
    "csma": dict(color="tab:red", marker="o", label="CSMA/CA"),
    "tsch": dict(color="tab:blue", marker="s", label="TSCH"),
    "scg_hybrid": dict(color="tab:green", marker="^", label="SCG hybrid"),
}


def load_rows(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def series_by_mode(rows, value_key):
    """mode -> (rates, means, half_widths), seeds pooled per rate."""
    pools: dict[str, dict[float, list[float]]] = defaultdict(lambda: defaultdict(list))
    for r in rows:
        val = float(r[value_key])
        if val == val:  # skip NaN cells
            pools[r["mode"]][float(r["rate_pps"])].append(val)
    out = {}
    for mode, by_rate in pools.items():
        rates = sorted(by_rate)
        stats = [mean_ci(by_rate[x]) for x in rates]
        out[mode] = (rates, [m for m, _ in stats], [h for _, h in stats])
    return out


def plot_metric(rows, value_key, ylabel, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    for mode, (rates, means, halves) in sorted(series_by_mode(rows, value_key).items()):
        style = MODE_STYLE.get(mode, dict(marker="x", label=mode))
        ax.errorbar(rates, means, yerr=halves, capsize=3, **style)
    ax.set_xlabel("source rate (packets/s per node)")
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    print(f"wrote {path}")


def plot_cdfs(sweep_dir: Path, out_dir: Path):
    fig, ax = plt.subplots(figsize=(6, 4))
    found = False
    for cdf_path in sorted(sweep_dir.glob("cdf_*.csv")):
        mode = cdf_path.stem[len("cdf_"):]
        points = load_rows(cdf_path)
        if not points:
            continue
        found = True
        xs = [int(p["collisions"]) for p in points]
        ys = [float(p["cumulative_fraction"]) for p in points]
        style = MODE_STYLE.get(mode, dict(marker="x", label=mode))
        ax.step([0] + xs, [ys[0]] + ys, where="post",
                color=style.get("color"), label=style.get("label", mode))
    if not found:
        plt.close(fig)
        return
    ax.set_xlabel("collisions per node")
    ax.set_ylabel("fraction of nodes")
    ax.set_ylim(0, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    path = out_dir / "collision_cdf.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    print(f"wrote {path}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("sweep_dir", help="directory holding summary.csv")
    parser.add_argument("--out", default=None, help="plot directory (default: sweep dir)")
    args = parser.parse_args()

    sweep_dir = Path(args.sweep_dir)
    out_dir = Path(args.out) if args.out else sweep_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = load_rows(sweep_dir / "summary.csv")
    plot_metric(rows, "throughput_pps", "delivered packets/s at the sink",
                out_dir / "throughput.png")
    plot_metric(rows, "pdr", "packet delivery ratio", out_dir / "pdr.png")
    plot_cdfs(sweep_dir, out_dir)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
