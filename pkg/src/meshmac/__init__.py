"""Discrete-event simulator for low-rate wireless mesh MAC regimes.

Compares three ways of sharing the medium in a tree-routed mesh:
contention (CSMA/CA on one channel), a centrally computed slotted schedule
(TSCH-style dedicated cells), and a hybrid that groups mutually visible
siblings into shared contention windows while everyone else keeps
dedicated cells.
"""

from .csma import BackoffParams, backoff_window, draw_backoff
from .engine import (
    MODE_CSMA,
    MODE_HYBRID,
    MODE_TSCH,
    RunConfig,
    RunMetrics,
    generate_traffic,
    run,
)
from .errors import (
    ConfigError,
    DisconnectedTopology,
    EmptyLinkSet,
    MeshMacError,
    NotALink,
    ParseError,
    TargetUnreachable,
    ValidationError,
)
from .grouping import GroupingResult, filter_group, hnp_cal, run_grouping
from .metrics import collision_cdf, mean_ci, packet_delivery_ratio, throughput_pps
from .scenario import Scenario, list_presets, load_preset, load_scenario
from .sweep import execute_cell, expand_cells, replay, run_sweep
from .topology import (
    Topology,
    calibrate_radius,
    generate_random,
    link_hidden_ratio,
    network_hidden_percentage,
)
from .tsch import (
    ScheduleParams,
    ScheduleResult,
    Slotframe,
    build_hybrid_schedule,
    build_tsch_schedule,
    compute_demands,
)

__version__ = "0.1.0"

__all__ = [
    "BackoffParams",
    "ConfigError",
    "DisconnectedTopology",
    "EmptyLinkSet",
    "GroupingResult",
    "MeshMacError",
    "MODE_CSMA",
    "MODE_HYBRID",
    "MODE_TSCH",
    "NotALink",
    "ParseError",
    "RunConfig",
    "RunMetrics",
    "Scenario",
    "ScheduleParams",
    "ScheduleResult",
    "Slotframe",
    "TargetUnreachable",
    "Topology",
    "ValidationError",
    "backoff_window",
    "build_hybrid_schedule",
    "build_tsch_schedule",
    "calibrate_radius",
    "collision_cdf",
    "compute_demands",
    "draw_backoff",
    "execute_cell",
    "expand_cells",
    "filter_group",
    "generate_random",
    "generate_traffic",
    "hnp_cal",
    "link_hidden_ratio",
    "list_presets",
    "load_preset",
    "load_scenario",
    "mean_ci",
    "network_hidden_percentage",
    "packet_delivery_ratio",
    "replay",
    "run",
    "run_grouping",
    "run_sweep",
    "throughput_pps",
]
