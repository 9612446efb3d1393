"""Sweep execution: expand a scenario into cells, run them, write artifacts.

A cell is one (node count, radio range, mode, rate, seed) point. Cells are
pure functions of the scenario, so they can run in worker processes and
still reassemble into a deterministic summary. Output files contain no
timestamps or environment details; rerunning a manifest reproduces them
byte for byte.

Layout under the output directory:

  manifest.json          the scenario, fully expanded, for exact reruns
  summary.csv            one row per cell, in grid order
  cdf_<mode>.csv         pooled per-node collision distribution per mode
  runs/<cell>/*.json     topology / grouping / schedule (with --artifacts)
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, asdict
from pathlib import Path

from . import engine
from .engine import MODE_CSMA, MODE_HYBRID, MODE_TSCH, RunConfig
from .errors import ParseError, TargetUnreachable, ValidationError
from .grouping import run_grouping
from .metrics import (
    SummaryRow,
    collision_cdf,
    summary_from_run,
    write_cdf_csv,
    write_summary_csv,
)
from .scenario import Scenario, scenario_from_dict
from .topology import (
    AS_WRITTEN,
    RECEIVER_CENTRIC,
    calibrate_radius,
    generate_random,
    network_hidden_percentage,
)
from .tsch import ScheduleParams, build_hybrid_schedule, build_tsch_schedule, compute_demands

log = logging.getLogger(__name__)

MANIFEST_FORMAT = "manifest/1"


@dataclass(frozen=True)
class SweepCell:
    mode: str
    n_nodes: int
    hidden_kind: str  # "target" or "radius"
    hidden_value: float
    rate_pps: float
    seed: int

    @property
    def key(self) -> str:
        return (
            f"{self.mode}_n{self.n_nodes}_{self.hidden_kind}{self.hidden_value:g}"
            f"_r{self.rate_pps:g}_s{self.seed}"
        )


def expand_cells(sc: Scenario) -> list[SweepCell]:
    """Grid order: node count, radio range, mode, rate, seed."""
    cells = []
    for n in sc.node_counts:
        for kind, value in sc.hidden_axis:
            for mode in sc.modes:
                for rate in sc.source_rates:
                    for seed in sc.seeds:
                        cells.append(SweepCell(mode, n, kind, value, rate, seed))
    return cells


def resolve_radius(sc: Scenario, n: int, kind: str, value: float, seed: int) -> float:
    """Radio range for one grid point, calibrating when a hidden level is asked.

    An unreachable target falls back to the closest achievable range; the
    summary records what the topology actually measured, so the shortfall
    stays visible.
    """
    if kind == "radius":
        return value
    try:
        cal = calibrate_radius(
            n,
            sc.area_side,
            seed,
            value,
            tolerance=sc.hidden_tolerance,
            formula=sc.engine.hnp_formula,
        )
        return cal.comm_radius
    except TargetUnreachable as exc:
        log.warning(
            "hidden target %.2f unreachable for n=%d seed=%d; using %.3g (achieves %.3f)",
            value, n, seed, exc.best_radius, exc.achieved,
        )
        return exc.best_radius


def schedule_params(sc: Scenario) -> ScheduleParams:
    return ScheduleParams(
        slot_us=int(round(sc.tsch.slot_ms * 1000)),
        slotframe_len=sc.tsch.slotframe_length,
        channels=sc.tsch.channels,
        reserved_slots=sc.tsch.reserved_slots,
        sink_radios=sc.tsch.sink_radios,
    )


def execute_cell(
    sc: Scenario, cell: SweepCell, comm_radius: float, artifacts: bool = False
) -> tuple[SummaryRow, "dict[str, str] | None"]:
    """Run one cell end to end: topology, schedule/grouping, simulation."""
    topo = generate_random(
        cell.n_nodes, sc.area_side, comm_radius, cell.seed, traffic_rate=cell.rate_pps
    )
    hidden_rc = network_hidden_percentage(topo, formula=RECEIVER_CENTRIC)
    hidden_aw = network_hidden_percentage(topo, formula=AS_WRITTEN)

    docs: "dict[str, str] | None" = {"topology.json": topo.to_json()} if artifacts else None
    cfg_kwargs = dict(
        topology=topo,
        mode=cell.mode,
        rate_pps=cell.rate_pps,
        duration_s=sc.duration_s,
        seed=cell.seed,
        warmup_fraction=sc.engine.warmup_fraction,
        queue_cap=sc.engine.queue_cap,
        csma=sc.csma.to_backoff_params(),
        group_csma=sc.hybrid.to_backoff_params(sc.csma.txn_duration_us),
        entry_jitter_us=sc.hybrid.entry_jitter_us,
    )

    if cell.mode in (MODE_TSCH, MODE_HYBRID):
        params = schedule_params(sc)
        frame_s = params.frame_len(topo.n) * params.slot_us / 1e6
        demands = compute_demands(topo, cell.rate_pps, frame_s)
        if cell.mode == MODE_TSCH:
            sched = build_tsch_schedule(topo, demands, params)
        else:
            grouping = run_grouping(topo)
            sched = build_hybrid_schedule(
                topo,
                grouping,
                demands,
                params,
                margin=sc.hybrid.margin,
                txn_us=sc.csma.txn_duration_us,
            )
            cfg_kwargs["grouping"] = grouping
            if docs is not None:
                docs["grouping.json"] = grouping.to_json()
        cfg_kwargs["schedule"] = sched.slotframe
        if docs is not None:
            docs["schedule.json"] = sched.slotframe.to_json()

    m = engine.run(RunConfig(**cfg_kwargs))
    row = summary_from_run(
        cell.mode, cell.rate_pps, cell.seed, comm_radius, hidden_rc, hidden_aw, m
    )
    return row, docs


def _cell_worker(payload) -> tuple[SummaryRow, "dict[str, str] | None"]:
    sc, cell, radius, artifacts = payload
    return execute_cell(sc, cell, radius, artifacts)


def scenario_to_dict(sc: Scenario) -> dict:
    """Fully explicit scenario document; reruns do not depend on defaults."""
    doc = {
        "name": sc.name,
        "description": sc.description,
        "modes": list(sc.modes),
        "node_counts": list(sc.node_counts),
        "source_rates": list(sc.source_rates),
        "duration_s": sc.duration_s,
        "seeds": list(sc.seeds),
        "area_side": sc.area_side,
        "hidden_tolerance": sc.hidden_tolerance,
        "engine": asdict(sc.engine),
        "csma": asdict(sc.csma),
        "tsch": {k: v for k, v in asdict(sc.tsch).items() if v is not None},
        "hybrid": asdict(sc.hybrid),
    }
    if sc.target_hidden is not None:
        doc["target_hidden"] = list(sc.target_hidden)
    else:
        doc["comm_radius"] = list(sc.comm_radius)
    return doc


@dataclass
class SweepResult:
    out_dir: Path
    rows: list[SummaryRow]
    manifest_path: Path


def run_sweep(
    sc: Scenario, out_dir, parallel: int = 1, artifacts: bool = False
) -> SweepResult:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = expand_cells(sc)
    log.info("scenario %s: %d cells", sc.name, len(cells))

    radii: dict[tuple[int, str, float, int], float] = {}
    for cell in cells:
        combo = (cell.n_nodes, cell.hidden_kind, cell.hidden_value, cell.seed)
        if combo not in radii:
            radii[combo] = resolve_radius(sc, *combo)

    payloads = [
        (sc, cell, radii[(cell.n_nodes, cell.hidden_kind, cell.hidden_value, cell.seed)], artifacts)
        for cell in cells
    ]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(_cell_worker, payloads))
    else:
        results = [_cell_worker(p) for p in payloads]

    rows = [row for row, _ in results]
    write_summary_csv(rows, out / "summary.csv")

    for mode in sc.modes:
        counts: list[int] = []
        for row in rows:
            if row.mode == mode:
                counts.extend(int(x) for x in row.per_node_collisions.split(";"))
        write_cdf_csv(collision_cdf(counts), out / f"cdf_{mode}.csv")

    if artifacts:
        for cell, (_, docs) in zip(cells, results):
            run_dir = out / "runs" / cell.key
            run_dir.mkdir(parents=True, exist_ok=True)
            for fname, text in docs.items():
                (run_dir / fname).write_text(text)

    manifest = {
        "format": MANIFEST_FORMAT,
        "scenario": scenario_to_dict(sc),
        "artifacts": artifacts,
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    log.info("wrote %s", out / "summary.csv")
    return SweepResult(out_dir=out, rows=rows, manifest_path=manifest_path)


def replay(manifest_path, out_dir, parallel: int = 1) -> SweepResult:
    """Re-execute a recorded sweep; outputs must match the original bytes."""
    p = Path(manifest_path)
    try:
        doc = json.loads(p.read_text())
    except OSError as exc:
        raise ParseError(f"cannot read manifest {p}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid manifest {p}: {exc}") from exc
    if doc.get("format") != MANIFEST_FORMAT:
        raise ValidationError(f"unsupported manifest format {doc.get('format')!r}")
    sc = scenario_from_dict(doc["scenario"])
    return run_sweep(sc, out_dir, parallel=parallel, artifacts=bool(doc.get("artifacts")))
