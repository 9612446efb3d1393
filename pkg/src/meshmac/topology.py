"""Network topology: node placement, radio adjacency, routing tree, hidden-node math.

Nodes live in a square area. Node 0 is the coordinator, pinned at the area
center; every other node is placed uniformly at random. Two nodes are
radio neighbors exactly when their distance is in (0, comm_radius]. Routing
is a BFS shortest-hop tree rooted at the coordinator.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DisconnectedTopology,
    EmptyLinkSet,
    NotALink,
    TargetUnreachable,
)
from .streams import PLACEMENT, make_rng

NodeId = int

COORDINATOR: NodeId = 0

RECEIVER_CENTRIC = "receiver_centric"
AS_WRITTEN = "as_written"
HNP_FORMULAS = (RECEIVER_CENTRIC, AS_WRITTEN)

TOPOLOGY_FORMAT = "topology/1"


@dataclass
class NodeInfo:
    """One node: identity, placement, tree position, and radio neighborhood."""

    id: NodeId
    position: tuple[float, float]
    parent: NodeId | None
    children: tuple[NodeId, ...]
    layer: int
    neighbors: frozenset[NodeId]
    traffic_rate: float = 0.0


@dataclass
class Topology:
    nodes: list[NodeInfo]
    area_side: float
    comm_radius: float
    seed: int

    @property
    def n(self) -> int:
        return len(self.nodes)

    def node(self, i: NodeId) -> NodeInfo:
        return self.nodes[i]

    def neighbors(self, i: NodeId) -> frozenset[NodeId]:
        return self.nodes[i].neighbors

    def sorted_neighbors(self, i: NodeId) -> list[NodeId]:
        return sorted(self.nodes[i].neighbors)

    def parents(self) -> list[NodeId]:
        """Nodes that have at least one child, ascending by id."""
        return [nd.id for nd in self.nodes if nd.children]

    def tree_links(self, direction: str = "both") -> list[tuple[NodeId, NodeId]]:
        """(sender, receiver) pairs along tree edges.

        direction: "up" for child->parent, "down" for parent->child,
        "both" for the concatenation (up then down, ascending child id).
        """
        ups = [
            (nd.id, nd.parent) for nd in self.nodes if nd.parent is not None
        ]
        ups.sort()
        if direction == "up":
            return ups
        downs = [(p, c) for (c, p) in ups]
        if direction == "down":
            return downs
        if direction == "both":
            return ups + downs
        raise ValueError(f"unknown link direction {direction!r}")

    def subtree_sizes(self) -> list[int]:
        """Size of each node's subtree, itself included."""
        sizes = [1] * self.n
        order = sorted(self.nodes, key=lambda nd: -nd.layer)
        for nd in order:
            if nd.parent is not None:
                sizes[nd.parent] += sizes[nd.id]
        return sizes

    def to_json(self) -> str:
        doc = {
            "format": TOPOLOGY_FORMAT,
            "seed": self.seed,
            "area_side": self.area_side,
            "comm_radius": self.comm_radius,
            "nodes": [
                {
                    "id": nd.id,
                    "position": [nd.position[0], nd.position[1]],
                    "parent": nd.parent,
                    "layer": nd.layer,
                    "neighbors": sorted(nd.neighbors),
                    "traffic_rate": nd.traffic_rate,
                }
                for nd in self.nodes
            ],
        }
        return json.dumps(doc, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Topology":
        doc = json.loads(text)
        if doc.get("format") != TOPOLOGY_FORMAT:
            raise ValueError(f"unsupported topology format {doc.get('format')!r}")
        children: dict[int, list[int]] = {}
        for rec in doc["nodes"]:
            if rec["parent"] is not None:
                children.setdefault(rec["parent"], []).append(rec["id"])
        nodes = [
            NodeInfo(
                id=rec["id"],
                position=(rec["position"][0], rec["position"][1]),
                parent=rec["parent"],
                children=tuple(sorted(children.get(rec["id"], []))),
                layer=rec["layer"],
                neighbors=frozenset(rec["neighbors"]),
                traffic_rate=rec["traffic_rate"],
            )
            for rec in sorted(doc["nodes"], key=lambda r: r["id"])
        ]
        return cls(
            nodes=nodes,
            area_side=doc["area_side"],
            comm_radius=doc["comm_radius"],
            seed=doc["seed"],
        )


def _adjacency(positions: np.ndarray, comm_radius: float) -> list[frozenset[int]]:
    """Unit-disk adjacency: 0 < dist <= comm_radius."""
    diff = positions[:, None, :] - positions[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    within = d2 <= comm_radius * comm_radius
    np.fill_diagonal(within, False)
    return [frozenset(np.flatnonzero(within[i]).tolist()) for i in range(len(positions))]


def _bfs_tree(adj: list[frozenset[int]]) -> tuple[list[int | None], list[int]]:
    """Shortest-hop tree rooted at the coordinator.

    Among equal-hop candidate parents the lowest id wins. Raises
    DisconnectedTopology when any node is unreachable.
    """
    n = len(adj)
    layer = [-1] * n
    parent: list[int | None] = [None] * n
    layer[COORDINATOR] = 0
    frontier = deque([COORDINATOR])
    while frontier:
        u = frontier.popleft()
        for v in sorted(adj[u]):
            if layer[v] == -1:
                layer[v] = layer[u] + 1
                parent[v] = u
                frontier.append(v)
            elif layer[v] == layer[u] + 1 and parent[v] is not None and u < parent[v]:
                parent[v] = u
    unreachable = [i for i in range(n) if layer[i] == -1]
    if unreachable:
        raise DisconnectedTopology(
            f"{len(unreachable)} node(s) cannot reach the coordinator "
            f"(first: {unreachable[:5]})"
        )
    return parent, layer


def from_positions(
    positions: "np.ndarray | list[tuple[float, float]]",
    area_side: float,
    comm_radius: float,
    seed: int = 0,
    traffic_rate: float = 0.0,
) -> Topology:
    """Build a topology from explicit coordinates (row 0 is the coordinator)."""
    pos = np.asarray(positions, dtype=float)
    adj = _adjacency(pos, comm_radius)
    parent, layer = _bfs_tree(adj)
    children: dict[int, list[int]] = {}
    for i, p in enumerate(parent):
        if p is not None:
            children.setdefault(p, []).append(i)
    nodes = [
        NodeInfo(
            id=i,
            position=(float(pos[i, 0]), float(pos[i, 1])),
            parent=parent[i],
            children=tuple(sorted(children.get(i, []))),
            layer=layer[i],
            neighbors=adj[i],
            traffic_rate=0.0 if i == COORDINATOR else traffic_rate,
        )
        for i in range(len(pos))
    ]
    return Topology(nodes=nodes, area_side=area_side, comm_radius=comm_radius, seed=seed)


def generate_random(
    n: int,
    area_side: float,
    comm_radius: float,
    seed: int,
    traffic_rate: float = 0.0,
) -> Topology:
    """Place the coordinator at the center and n-1 nodes uniformly at random.

    Deterministic in (n, area_side, seed); the radius only affects adjacency,
    not placement, so calibration can re-probe radii against fixed coordinates.
    """
    if n < 2:
        raise ValueError("need at least a coordinator and one node")
    rng = make_rng(seed, PLACEMENT)
    pos = np.empty((n, 2), dtype=float)
    pos[0] = (area_side / 2.0, area_side / 2.0)
    pos[1:] = rng.uniform(0.0, area_side, size=(n - 1, 2))
    return from_positions(pos, area_side, comm_radius, seed=seed, traffic_rate=traffic_rate)


def build_tree(topology: Topology) -> Topology:
    """Recompute parent/children/layer fields from adjacency (idempotent)."""
    adj = [nd.neighbors for nd in topology.nodes]
    parent, layer = _bfs_tree(adj)
    children: dict[int, list[int]] = {}
    for i, p in enumerate(parent):
        if p is not None:
            children.setdefault(p, []).append(i)
    nodes = [
        NodeInfo(
            id=nd.id,
            position=nd.position,
            parent=parent[nd.id],
            children=tuple(sorted(children.get(nd.id, []))),
            layer=layer[nd.id],
            neighbors=nd.neighbors,
            traffic_rate=nd.traffic_rate,
        )
        for nd in topology.nodes
    ]
    return Topology(
        nodes=nodes,
        area_side=topology.area_side,
        comm_radius=topology.comm_radius,
        seed=topology.seed,
    )


def link_hidden_ratio(
    topology: Topology,
    sender: NodeId,
    receiver: NodeId,
    formula: str = RECEIVER_CENTRIC,
) -> float:
    """Fraction of one endpoint's other neighbors the far endpoint cannot hear.

    receiver_centric (default): of the receiver's neighbors (sender excluded),
    the fraction not also heard by the sender; these can collide a reception
    at the receiver without the sender ever detecting them.

    as_written: the mirrored ratio over the sender's neighborhood, counting
    nodes the sender hears but the receiver does not.
    """
    if sender == receiver or receiver not in topology.neighbors(sender):
        raise NotALink(f"{sender}->{receiver} is not a radio link")
    s_side = topology.neighbors(sender) - {receiver}
    r_side = topology.neighbors(receiver) - {sender}
    if formula == RECEIVER_CENTRIC:
        base, other = r_side, s_side
    elif formula == AS_WRITTEN:
        base, other = s_side, r_side
    else:
        raise ValueError(f"unknown hidden-node formula {formula!r}")
    if not base:
        return 0.0
    return len(base - other) / len(base)


def network_hidden_percentage(
    topology: Topology,
    links: "list[tuple[NodeId, NodeId]] | None" = None,
    formula: str = RECEIVER_CENTRIC,
) -> float:
    """Arithmetic mean of link hidden ratios.

    Defaults to every tree uplink plus the matching downlink.
    """
    if links is None:
        links = topology.tree_links("both")
    if not links:
        raise EmptyLinkSet("no links to average over")
    total = 0.0
    for sender, receiver in links:
        total += link_hidden_ratio(topology, sender, receiver, formula=formula)
    return total / len(links)


@dataclass
class CalibrationResult:
    comm_radius: float
    achieved: float
    probes: list[tuple[float, float]] = field(default_factory=list, repr=False)


def _hidden_at(
    n: int, area_side: float, seed: int, radius: float, formula: str, traffic_rate: float
) -> float | None:
    """Hidden percentage at one radius, or None when disconnected."""
    try:
        topo = generate_random(n, area_side, radius, seed, traffic_rate=traffic_rate)
    except DisconnectedTopology:
        return None
    return network_hidden_percentage(topo, formula=formula)


def calibrate_radius(
    n: int,
    area_side: float,
    seed: int,
    target_hidden: float,
    tolerance: float = 0.03,
    formula: str = RECEIVER_CENTRIC,
    traffic_rate: float = 0.0,
    max_probes: int = 64,
) -> CalibrationResult:
    """Find a comm_radius whose achieved hidden percentage is near the target.

    Bisects radius over [area_side/50, area_side*sqrt(2)] assuming hidden
    percentage falls as the radius grows. The relationship is only roughly
    monotone (it plateaus at small radii), so the result is the argmin of
    |achieved - target| over every probe, not the final bisection midpoint.
    A disconnected probe counts as "radius too small".

    Raises TargetUnreachable when no probe lands within tolerance; the
    exception carries the best probe so callers may proceed with it.
    """
    lo = area_side / 50.0
    hi = area_side * math.sqrt(2.0)
    probes: list[tuple[float, float]] = []

    def probe(radius: float) -> float | None:
        achieved = _hidden_at(n, area_side, seed, radius, formula, traffic_rate)
        if achieved is not None:
            probes.append((radius, achieved))
        return achieved

    # Endpoints first so targets at either extreme are reachable.
    probe(hi)
    probe(lo)
    budget = max_probes - 2
    for _ in range(budget):
        best = min(probes, key=lambda p: abs(p[1] - target_hidden), default=None)
        if best is not None and abs(best[1] - target_hidden) <= tolerance:
            break
        mid = (lo + hi) / 2.0
        achieved = probe(mid)
        if achieved is None or achieved > target_hidden:
            lo = mid
        else:
            hi = mid
        if hi - lo < area_side * 1e-6:
            break

    if not probes:
        raise TargetUnreachable(target_hidden, float("nan"), float("nan"))
    radius, achieved = min(probes, key=lambda p: abs(p[1] - target_hidden))
    if abs(achieved - target_hidden) > tolerance:
        raise TargetUnreachable(target_hidden, radius, achieved)
    return CalibrationResult(comm_radius=radius, achieved=achieved, probes=probes)
