"""End-to-end acceptance gate.

Each test is one release criterion, checked at its stated tolerance; the
shared sweeps run the bundled presets exactly as a user would. Runtime for
the whole module is dominated by the three preset sweeps (a few minutes).
"""

import time

import numpy as np
import pytest

from meshmac.errors import DisconnectedTopology
from meshmac.grouping import run_grouping, size_cap_for_layer
from meshmac.scenario import load_preset
from meshmac.sweep import (
    execute_cell,
    expand_cells,
    replay,
    resolve_radius,
    run_sweep,
    schedule_params,
)
from meshmac.topology import (
    AS_WRITTEN,
    RECEIVER_CENTRIC,
    generate_random,
    network_hidden_percentage,
)
from meshmac.tsch import build_tsch_schedule, compute_demands

pytestmark = pytest.mark.acceptance


# --------------------------------------------------------------- fixtures

@pytest.fixture(scope="session")
def rate_sweep_300(tmp_path_factory):
    """The bundled 300-node rate sweep, run as shipped."""
    out = tmp_path_factory.mktemp("rate300")
    t0 = time.monotonic()
    result = run_sweep(load_preset("rate_sweep_300"), out)
    return result, time.monotonic() - t0


@pytest.fixture(scope="session")
def rate_sweep_100(tmp_path_factory):
    """The bundled 100-node rate sweep (0% and 50% hidden)."""
    out = tmp_path_factory.mktemp("rate100")
    result = run_sweep(load_preset("rate_sweep_100"), out)
    return result


@pytest.fixture(scope="session")
def collision_sweep(tmp_path_factory):
    """The bundled collision-distribution preset, plus its elapsed time."""
    out = tmp_path_factory.mktemp("cdf300")
    t0 = time.monotonic()
    result = run_sweep(load_preset("collision_cdf_300"), out)
    return result, time.monotonic() - t0


def rows_by(rows, **match):
    out = []
    for r in rows:
        if all(getattr(r, k) == v for k, v in match.items()):
            out.append(r)
    return out


def mean(values):
    return sum(values) / len(values)


# ------------------------------------------------- 1: hidden-node arithmetic

def brute_hidden_percentage(topo, formula):
    """Recompute the metric from raw positions: adjacency, tree, and mean."""
    n = topo.n
    pos = [topo.node(i).position for i in range(n)]
    r2 = topo.comm_radius * topo.comm_radius
    adj = [set() for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            dx, dy = pos[i][0] - pos[j][0], pos[i][1] - pos[j][1]
            if 0 < dx * dx + dy * dy <= r2:
                adj[i].add(j)
                adj[j].add(i)

    # Shortest hop count via breadth-first layers; the parent is the
    # lowest-numbered neighbor one layer closer to the root.
    INF = n + 1
    layer = [INF] * n
    layer[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in adj[u]:
                if layer[v] == INF:
                    layer[v] = layer[u] + 1
                    nxt.append(v)
        frontier = nxt
    parent = [None] * n
    for v in range(1, n):
        ups = [u for u in adj[v] if layer[u] == layer[v] - 1]
        parent[v] = min(ups)

    def ratio(sender, receiver):
        s_side = adj[sender] - {receiver}
        r_side = adj[receiver] - {sender}
        base, other = (r_side, s_side) if formula == RECEIVER_CENTRIC else (s_side, r_side)
        if not base:
            return 0.0
        return len(base - other) / len(base)

    links = [(v, parent[v]) for v in range(1, n)] + [(parent[v], v) for v in range(1, n)]
    total = 0.0
    for s, r in links:
        total += ratio(s, r)
    return total / len(links)


def test_01_hidden_metric_matches_brute_force():
    t0 = time.monotonic()
    rng = np.random.default_rng(20250815)
    cases = 0
    while cases < 1000:
        n = int(rng.integers(2, 9))
        radius = float(rng.uniform(20.0, 120.0))
        seed = int(rng.integers(0, 2**31))
        try:
            topo = generate_random(n, 100.0, radius, seed=seed)
        except DisconnectedTopology:
            continue
        for formula in (RECEIVER_CENTRIC, AS_WRITTEN):
            assert network_hidden_percentage(topo, formula=formula) == \
                brute_hidden_percentage(topo, formula)
        cases += 1
    elapsed = time.monotonic() - t0
    assert cases >= 1000
    assert elapsed < 60.0, f"oracle sweep took {elapsed:.1f}s"


# ---------------------------------------------------- 2: grouping invariants

def test_02_grouping_invariants_at_scale():
    t0 = time.monotonic()
    rng = np.random.default_rng(77)
    checked = 0
    groups_seen = 0
    while checked < 200:
        n = int(rng.integers(20, 301))
        radius = float(rng.uniform(18.0, 55.0))
        seed = int(rng.integers(0, 2**31))
        try:
            topo = generate_random(n, 100.0, radius, seed=seed)
        except DisconnectedTopology:
            continue
        res = run_grouping(topo)
        placed = set()
        for g in res.groups:
            groups_seen += 1
            cap = size_cap_for_layer(topo.node(g.members[0]).layer)
            assert 2 <= len(g.members) <= cap
            for m in g.members:
                assert m not in placed, "member assigned twice"
                placed.add(m)
                assert topo.node(m).parent == g.parent
                # Zero intra-group hidden pairs: all members mutually audible.
                for other in g.members:
                    assert other == m or other in topo.neighbors(m)
        for u in res.ungrouped:
            assert u not in placed
            placed.add(u)
        assert placed == set(range(1, topo.n)), "partition must be exact"
        checked += 1
    elapsed = time.monotonic() - t0
    assert checked >= 200 and groups_seen > 0
    assert elapsed < 120.0, f"invariant sweep took {elapsed:.1f}s"


# ------------------------------------------------- 3: collision elimination

def test_03_grouped_windows_eliminate_collisions(collision_sweep):
    result, elapsed = collision_sweep
    csma = rows_by(result.rows, mode="csma")
    hybrid = rows_by(result.rows, mode="scg_hybrid")
    assert csma and hybrid
    seeds = sorted({r.seed for r in csma})
    assert seeds == sorted({r.seed for r in hybrid})
    total_csma = sum(r.collisions for r in csma)
    total_hybrid = sum(r.collisions for r in hybrid)
    assert total_csma > 1000, "contention baseline must actually collide"
    assert total_hybrid <= 0.05 * total_csma, (
        f"grouped windows kept {total_hybrid} of {total_csma} collisions"
    )
    assert elapsed < 600.0, f"collision sweep took {elapsed:.1f}s"


# ------------------------------------------- 4: scheduled runs are lossless

def test_04_scheduled_within_capacity_is_lossless():
    qualifying = 0
    radii: dict[tuple, float] = {}
    for name in ("scale_sweep", "rate_sweep_100", "rate_sweep_300"):
        sc = load_preset(name)
        if "tsch" not in sc.modes:
            continue
        params = schedule_params(sc)
        for cell in expand_cells(sc):
            if cell.mode != "tsch":
                continue
            combo = (name, cell.n_nodes, cell.hidden_kind, cell.hidden_value, cell.seed)
            if combo not in radii:
                radii[combo] = resolve_radius(sc, cell.n_nodes, cell.hidden_kind,
                                              cell.hidden_value, cell.seed)
            radius = radii[combo]
            topo = generate_random(cell.n_nodes, sc.area_side, radius, cell.seed,
                                   traffic_rate=cell.rate_pps)
            frame_s = params.frame_len(topo.n) * params.slot_us / 1e6
            demands = compute_demands(topo, cell.rate_pps, frame_s)
            if build_tsch_schedule(topo, demands, params).capacity_exceeded:
                continue
            row, _ = execute_cell(sc, cell, radius)
            qualifying += 1
            assert row.collisions == 0, f"{name}/{cell.key} collided"
            assert row.dropped == 0 and row.delivered > 0
            assert row.pdr == 1.0, f"{name}/{cell.key} pdr={row.pdr}"
    assert qualifying >= 10, f"only {qualifying} within-capacity cells found"


# ------------------------------------------------- 5: scheduled throughput

def test_05_scheduled_throughput_ceiling(rate_sweep_100):
    rows = rows_by(rate_sweep_100.rows, mode="tsch")
    single_hop = [r for r in rows if r.hidden_receiver_centric < 0.05]
    assert single_hop
    rates = sorted({r.rate_pps for r in single_hop if r.rate_pps >= 2})
    assert rates
    for rate in rates:
        thr = mean([r.throughput_pps for r in single_hop if r.rate_pps == rate])
        assert 96.0 <= thr <= 100.0, f"rate {rate}: {thr:.2f} pkt/s"


# --------------------------------------------- 6: contention crossover point

def test_06_contention_overtakes_scheduling(rate_sweep_100):
    single_hop = [r for r in rate_sweep_100.rows if r.hidden_receiver_centric < 0.05]
    rates = sorted({r.rate_pps for r in single_hop})
    csma_thr = {
        rate: mean([r.throughput_pps for r in rows_by(single_hop, mode="csma", rate_pps=rate)])
        for rate in rates
    }
    tsch_thr = {
        rate: mean([r.throughput_pps for r in rows_by(single_hop, mode="tsch", rate_pps=rate)])
        for rate in rates
    }
    candidates = [r for r in rates if 3.0 <= r <= 6.0]
    assert candidates, "sweep must sample rates in the crossover band"
    winners = [
        r for r in candidates
        if all(csma_thr[q] > tsch_thr[q] for q in rates if q >= r)
    ]
    assert winners, (
        "no rate in [3, 6] from which contention stays ahead of the schedule: "
        + ", ".join(f"{r:g}: {csma_thr[r]:.1f} vs {tsch_thr[r]:.1f}" for r in rates)
    )


# --------------------------------------------- 7: hidden nodes hurt contention

def test_07_hidden_nodes_degrade_contention(rate_sweep_100):
    rows = rows_by(rate_sweep_100.rows, mode="csma")
    clear = [r for r in rows if r.hidden_receiver_centric < 0.05]
    hidden = [r for r in rows if r.hidden_receiver_centric > 0.3]
    assert clear and hidden
    for rate in sorted({r.rate_pps for r in rows if r.rate_pps >= 2}):
        thr_clear = mean([r.throughput_pps for r in clear if r.rate_pps == rate])
        thr_hidden = mean([r.throughput_pps for r in hidden if r.rate_pps == rate])
        pdr_clear = mean([r.pdr for r in clear if r.rate_pps == rate])
        pdr_hidden = mean([r.pdr for r in hidden if r.rate_pps == rate])
        assert thr_hidden < thr_clear, f"rate {rate}: throughput did not degrade"
        assert pdr_hidden < pdr_clear, f"rate {rate}: delivery did not degrade"


# ------------------------------------------------- 8: hybrid doubles tsch

def test_08_hybrid_doubles_scheduled_throughput(rate_sweep_300):
    result, _elapsed = rate_sweep_300
    for rate in (8.0, 9.0, 10.0):
        tsch = mean([r.throughput_pps for r in rows_by(result.rows, mode="tsch", rate_pps=rate)])
        hybrid = mean([r.throughput_pps
                       for r in rows_by(result.rows, mode="scg_hybrid", rate_pps=rate)])
        ratio = hybrid / tsch
        assert 1.6 <= ratio <= 2.4, f"rate {rate}: ratio {ratio:.2f}"


# --------------------------------------- 9: contention reliability, low rate

def test_09_contention_reliability_at_low_rate(rate_sweep_300):
    result, _elapsed = rate_sweep_300
    rows = rows_by(result.rows, mode="csma", rate_pps=1.0)
    assert rows
    for r in rows:
        assert 0.35 <= r.hidden_receiver_centric <= 0.5, "preset drifted off its hidden level"
    pdr = mean([r.pdr for r in rows])
    assert 0.65 <= pdr <= 0.85, f"mean pdr {pdr:.3f}"


# --------------------------------------------------- 10: hybrid reliability

def test_10_hybrid_reliability(rate_sweep_300):
    result, _elapsed = rate_sweep_300
    for rate in (1.0, 2.0, 3.0):
        for r in rows_by(result.rows, mode="scg_hybrid", rate_pps=rate):
            assert r.pdr >= 0.999, f"rate {rate} seed {r.seed}: pdr {r.pdr:.5f}"


# ----------------------------------------------------- 11: replay determinism

def test_11_manifest_replay_is_byte_identical(collision_sweep, tmp_path):
    result, _elapsed = collision_sweep
    again = replay(result.manifest_path, tmp_path / "again")
    originals = sorted(p for p in result.out_dir.iterdir() if p.suffix == ".csv")
    assert originals
    for path in originals:
        other = again.out_dir / path.name
        assert other.read_bytes() == path.read_bytes(), f"{path.name} differs"
