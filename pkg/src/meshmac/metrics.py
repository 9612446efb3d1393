"""Run-level measurements and CSV export.

Accounting rules, shared by every mode:

* Throughput counts deliveries at the coordinator whose delivery time falls
  inside the measurement window (after warmup), divided by the window size.
* Delivery ratio is fate-based over the cohort of packets generated inside
  the window: delivered / (delivered + dropped). Packets still queued or in
  the air when the run ends have no fate yet and are excluded.
* Collision counts attribute each failed transmission to its sender at the
  moment the transmission ends.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields
from typing import Iterable, Sequence

from .engine import RunMetrics
from .errors import InsufficientSeeds, NoTraffic


def throughput_pps(m: RunMetrics) -> float:
    """Coordinator deliveries per second over the measurement window."""
    if m.window_s <= 0:
        raise NoTraffic("measurement window is empty")
    return m.delivered_in_window / m.window_s


def packet_delivery_ratio(m: RunMetrics) -> float:
    """Fraction of fate-decided cohort packets that reached the coordinator."""
    decided = m.total_delivered + m.total_dropped
    if decided == 0:
        raise NoTraffic("no packet generated in the window has a decided fate")
    return m.total_delivered / decided


def collision_cdf(counts: Sequence[int]) -> list[tuple[int, float]]:
    """Empirical distribution of per-node collision counts.

    Returns (value, fraction of nodes with count <= value) pairs for each
    distinct value in ascending order; the last fraction is exactly 1.0.
    """
    if not counts:
        return []
    ordered = sorted(counts)
    total = len(ordered)
    out: list[tuple[int, float]] = []
    seen = 0
    for i, v in enumerate(ordered):
        seen += 1
        if i + 1 == total or ordered[i + 1] != v:
            out.append((v, seen / total))
    return out


def mean_ci(values: Sequence[float]) -> tuple[float, float]:
    """Sample mean and a 95% normal-approximation half width.

    A single value yields a zero half width; an empty sequence is an error.
    """
    k = len(values)
    if k == 0:
        raise InsufficientSeeds("need at least one value to aggregate")
    mean = sum(values) / k
    if k == 1:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (k - 1)
    return mean, 1.96 * math.sqrt(var / k)


@dataclass(frozen=True)
class SummaryRow:
    """One sweep cell result; the CSV column order follows field order."""

    mode: str
    n_nodes: int
    rate_pps: float
    seed: int
    comm_radius: float
    hidden_receiver_centric: float
    hidden_as_written: float
    generated: int
    delivered: int
    dropped: int
    in_flight: int
    collisions: int
    throughput_pps: float
    pdr: float
    per_node_collisions: str  # ';'-joined per-node counts, node id order

    def to_csv(self) -> list[str]:
        return [
            self.mode,
            str(self.n_nodes),
            _num(self.rate_pps),
            str(self.seed),
            f"{self.comm_radius:.9g}",
            f"{self.hidden_receiver_centric:.6f}",
            f"{self.hidden_as_written:.6f}",
            str(self.generated),
            str(self.delivered),
            str(self.dropped),
            str(self.in_flight),
            str(self.collisions),
            f"{self.throughput_pps:.6f}",
            f"{self.pdr:.6f}",
            self.per_node_collisions,
        ]


SUMMARY_HEADER = [f.name for f in fields(SummaryRow)]


def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else f"{x:.6g}"


def summary_from_run(
    mode: str,
    rate_pps: float,
    seed: int,
    comm_radius: float,
    hidden_receiver_centric: float,
    hidden_as_written: float,
    m: RunMetrics,
) -> SummaryRow:
    try:
        ratio = packet_delivery_ratio(m)
    except NoTraffic:
        ratio = float("nan")
    return SummaryRow(
        mode=mode,
        n_nodes=m.n,
        rate_pps=rate_pps,
        seed=seed,
        comm_radius=comm_radius,
        hidden_receiver_centric=hidden_receiver_centric,
        hidden_as_written=hidden_as_written,
        generated=m.total_generated,
        delivered=m.total_delivered,
        dropped=m.total_dropped,
        in_flight=m.total_in_flight,
        collisions=m.total_collisions,
        throughput_pps=throughput_pps(m),
        pdr=ratio,
        per_node_collisions=";".join(str(c) for c in m.collided),
    )


def write_summary_csv(rows: Iterable[SummaryRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_HEADER)
        for row in rows:
            w.writerow(row.to_csv())


def write_cdf_csv(points: Sequence[tuple[int, float]], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["collisions", "cumulative_fraction"])
        for value, frac in points:
            w.writerow([str(value), f"{frac:.6f}"])
