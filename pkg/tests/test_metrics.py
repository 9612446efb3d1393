"""Measurement accounting and CSV formatting."""

import csv
import math

import pytest

from meshmac.engine import RunMetrics
from meshmac.errors import InsufficientSeeds, NoTraffic
from meshmac.metrics import (
    SUMMARY_HEADER,
    collision_cdf,
    mean_ci,
    packet_delivery_ratio,
    summary_from_run,
    throughput_pps,
    write_cdf_csv,
    write_summary_csv,
)


def make_metrics(**over):
    base = dict(
        n=3,
        duration_us=10_000_000,
        warmup_us=1_000_000,
        generated=[0, 10, 10],
        delivered=[0, 9, 8],
        dropped=[0, 1, 2],
        in_flight=[0, 0, 0],
        collided=[0, 3, 5],
        delivered_series=[2] * 9,
        delivered_in_window=18,
    )
    base.update(over)
    return RunMetrics(**base)


# -------------------------------------------------------------- core ratios

def test_throughput_is_window_deliveries_per_second():
    m = make_metrics()
    assert throughput_pps(m) == pytest.approx(18 / 9.0)


def test_throughput_requires_a_window():
    m = make_metrics(warmup_us=10_000_000)
    with pytest.raises(NoTraffic):
        throughput_pps(m)


def test_pdr_counts_only_decided_fates():
    m = make_metrics()
    assert packet_delivery_ratio(m) == pytest.approx(17 / 20)


def test_pdr_ignores_in_flight_packets():
    m = make_metrics(delivered=[0, 9, 8], dropped=[0, 0, 0], in_flight=[0, 1, 2])
    assert packet_delivery_ratio(m) == 1.0


def test_pdr_with_no_decided_fate():
    m = make_metrics(delivered=[0, 0, 0], dropped=[0, 0, 0])
    with pytest.raises(NoTraffic):
        packet_delivery_ratio(m)


# ---------------------------------------------------------------------- cdf

def test_collision_cdf_steps():
    assert collision_cdf([0, 0, 1, 3]) == [(0, 0.5), (1, 0.75), (3, 1.0)]


def test_collision_cdf_single_value():
    assert collision_cdf([7, 7, 7]) == [(7, 1.0)]


def test_collision_cdf_empty():
    assert collision_cdf([]) == []


def test_collision_cdf_ends_at_one():
    points = collision_cdf([5, 2, 9, 2, 0, 14])
    assert [v for v, _ in points] == sorted({0, 2, 5, 9, 14})
    assert points[-1][1] == 1.0
    fracs = [f for _, f in points]
    assert fracs == sorted(fracs)


# -------------------------------------------------------------- aggregation

def test_mean_ci_normal_half_width():
    mean, half = mean_ci([1.0, 2.0, 3.0])
    assert mean == 2.0
    assert half == pytest.approx(1.96 * math.sqrt(1.0 / 3))


def test_mean_ci_single_value():
    assert mean_ci([4.2]) == (4.2, 0.0)


def test_mean_ci_empty_raises():
    with pytest.raises(InsufficientSeeds):
        mean_ci([])


# ---------------------------------------------------------------------- csv

def test_summary_row_from_run():
    row = summary_from_run("csma", 2.0, 7, 19.5, 0.43, 0.5, make_metrics())
    assert row.n_nodes == 3
    assert row.generated == 20
    assert row.collisions == 8
    assert row.per_node_collisions == "0;3;5"
    assert row.pdr == pytest.approx(0.85)


def test_summary_row_pdr_nan_without_traffic():
    m = make_metrics(delivered=[0, 0, 0], dropped=[0, 0, 0], delivered_in_window=0)
    row = summary_from_run("csma", 2.0, 7, 19.5, 0.43, 0.5, m)
    assert math.isnan(row.pdr)
    assert row.to_csv()[SUMMARY_HEADER.index("pdr")] == "nan"


def test_summary_csv_layout(tmp_path):
    row = summary_from_run("tsch", 2.0, 7, 19.5, 0.43, 0.5, make_metrics())
    path = tmp_path / "summary.csv"
    write_summary_csv([row], path)
    with open(path, newline="") as fh:
        records = list(csv.reader(fh))
    assert records[0] == SUMMARY_HEADER
    assert records[1][0] == "tsch"
    assert records[1][SUMMARY_HEADER.index("rate_pps")] == "2"
    assert records[1][SUMMARY_HEADER.index("throughput_pps")] == "2.000000"


def test_rate_column_formats_cleanly():
    whole = summary_from_run("csma", 4.0, 1, 10.0, 0.0, 0.0, make_metrics())
    frac = summary_from_run("csma", 2.5, 1, 10.0, 0.0, 0.0, make_metrics())
    assert whole.to_csv()[2] == "4"
    assert frac.to_csv()[2] == "2.5"


def test_cdf_csv_layout(tmp_path):
    path = tmp_path / "cdf.csv"
    write_cdf_csv([(0, 0.5), (3, 1.0)], path)
    with open(path, newline="") as fh:
        records = list(csv.reader(fh))
    assert records == [
        ["collisions", "cumulative_fraction"],
        ["0", "0.500000"],
        ["3", "1.000000"],
    ]
