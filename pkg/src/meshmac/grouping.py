"""Contention-group formation from neighbor reports.

Children of each routing parent are partitioned into small groups whose
members can all hear one another. Members of a group can then share a
contention window without hidden-node collisions: anything a member cannot
hear is, by construction, not in its group.

The partition is built greedily. Children seed groups in ascending order of
neighborhood size (sparsely connected nodes first, since they have the
fewest grouping options). A seed's candidate set is itself plus every
not-yet-assigned sibling it can hear; candidates that hide from the most
peers are evicted until the rest are mutually visible. Groups are finally
capped, with close middle layers capped harder because their groups relay
the most aggregate traffic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .topology import NodeId, Topology

GROUPING_FORMAT = "grouping/1"

# Group size ceilings by member layer. Layers 2 and 3 carry the bulk of
# relayed traffic, so their windows are kept short.
TIGHT_LAYERS = frozenset({2, 3})
CAP_TIGHT = 2
CAP_DEFAULT = 4


def size_cap_for_layer(layer: int) -> int:
    return CAP_TIGHT if layer in TIGHT_LAYERS else CAP_DEFAULT


@dataclass(frozen=True)
class NeighborReport:
    """What one node can hear, as it would report to the coordinator."""

    reporter: NodeId
    neighbor_ids: tuple[NodeId, ...]


@dataclass
class CandidateTable:
    """Candidates ranked by how many co-candidates they cannot hear.

    Rows are (node, hidden_peer_count) sorted by descending count, ties by
    ascending node id; the head is always the next eviction choice.
    """

    rows: list[tuple[NodeId, int]] = field(default_factory=list)

    @property
    def head(self) -> tuple[NodeId, int]:
        return self.rows[0]

    def nodes(self) -> list[NodeId]:
        return [node for node, _ in self.rows]


@dataclass(frozen=True)
class Group:
    group_id: int
    parent: NodeId
    members: tuple[NodeId, ...]


@dataclass
class GroupingResult:
    groups: list[Group]
    ungrouped: list[NodeId]

    def member_to_group(self) -> dict[NodeId, Group]:
        out: dict[NodeId, Group] = {}
        for g in self.groups:
            for m in g.members:
                out[m] = g
        return out

    def to_json(self) -> str:
        doc = {
            "format": GROUPING_FORMAT,
            "groups": [
                {
                    "group_id": g.group_id,
                    "parent": g.parent,
                    "members": list(g.members),
                }
                for g in self.groups
            ],
            "ungrouped": list(self.ungrouped),
        }
        return json.dumps(doc, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "GroupingResult":
        doc = json.loads(text)
        if doc.get("format") != GROUPING_FORMAT:
            raise ValueError(f"unsupported grouping format {doc.get('format')!r}")
        groups = [
            Group(
                group_id=rec["group_id"],
                parent=rec["parent"],
                members=tuple(rec["members"]),
            )
            for rec in doc["groups"]
        ]
        return cls(groups=groups, ungrouped=list(doc["ungrouped"]))


def collect_neighbor_reports(topology: Topology) -> list[NeighborReport]:
    """One report per node, ascending by reporter id."""
    return [
        NeighborReport(reporter=nd.id, neighbor_ids=tuple(sorted(nd.neighbors)))
        for nd in topology.nodes
    ]


def _neighbor_map(
    topology: Topology, reports: "list[NeighborReport] | None"
) -> dict[NodeId, frozenset[NodeId]]:
    if reports is None:
        return {nd.id: nd.neighbors for nd in topology.nodes}
    return {r.reporter: frozenset(r.neighbor_ids) for r in reports}


def hnp_cal(
    candidates: "list[NodeId] | set[NodeId]",
    neighbor_map: dict[NodeId, frozenset[NodeId]],
) -> CandidateTable:
    """Count, for each candidate, the co-candidates it cannot hear."""
    cset = set(candidates)
    rows = [
        (node, len(cset - neighbor_map[node] - {node})) for node in sorted(cset)
    ]
    rows.sort(key=lambda row: (-row[1], row[0]))
    return CandidateTable(rows=rows)


def filter_group(
    topology: Topology,
    start: NodeId,
    eligible: "set[NodeId] | None" = None,
    reports: "list[NeighborReport] | None" = None,
) -> list[NodeId]:
    """Shrink a seed's candidate set until every survivor hears every other.

    Candidates are the seed plus its same-parent neighbors (optionally
    restricted to `eligible`). The candidate hiding from the most peers is
    evicted repeatedly; the seed hears every candidate by construction, so
    its count stays zero and it always survives. Returns survivors ascending.
    """
    nmap = _neighbor_map(topology, reports)
    parent = topology.node(start).parent
    if parent is None:
        raise ValueError(f"node {start} has no parent; cannot seed a group")
    siblings = {v for v in nmap[start] if topology.node(v).parent == parent}
    if eligible is not None:
        siblings &= set(eligible)
    candidates = {start} | siblings
    while len(candidates) > 1:
        table = hnp_cal(candidates, nmap)
        node, count = table.head
        if count == 0:
            break
        candidates.discard(node)
    return sorted(candidates)


def apply_size_cap(
    members: list[NodeId],
    topology: Topology,
    start: "NodeId | None" = None,
) -> list[NodeId]:
    """Trim an oversized group, keeping the members best aligned with its seed.

    Alignment is shared-neighbor overlap with the seed (ties: lower id).
    The seed itself is always retained. Members must share a layer; the cap
    is chosen from that layer.
    """
    if not members:
        return []
    if start is None:
        start = members[0]
    layer = topology.node(members[0]).layer
    cap = size_cap_for_layer(layer)
    if len(members) <= cap:
        return sorted(members)
    start_nbrs = topology.neighbors(start)
    ranked = sorted(
        (m for m in members if m != start),
        key=lambda m: (-len(topology.neighbors(m) & start_nbrs), m),
    )
    kept = [start] + ranked[: cap - 1]
    return sorted(kept)


def run_grouping(topology: Topology) -> GroupingResult:
    """Partition every non-coordinator node into groups and singletons.

    Each parent's children are processed in ascending-neighbor-count order
    (ties: ascending id). Every child lands in exactly one group or in the
    ungrouped list; groups have 2..cap members sharing that parent.
    """
    reports = collect_neighbor_reports(topology)
    nmap = _neighbor_map(topology, reports)
    groups: list[Group] = []
    ungrouped: list[NodeId] = []
    next_id = 0
    for parent in topology.parents():
        children = list(topology.node(parent).children)
        order = sorted(children, key=lambda c: (len(nmap[c]), c))
        unassigned = set(children)
        for child in order:
            if child not in unassigned:
                continue
            eligible = unassigned - {child}
            survivors = filter_group(topology, child, eligible=eligible, reports=reports)
            capped = apply_size_cap(survivors, topology, start=child)
            if len(capped) >= 2:
                groups.append(
                    Group(group_id=next_id, parent=parent, members=tuple(capped))
                )
                next_id += 1
                unassigned -= set(capped)
            else:
                ungrouped.append(child)
                unassigned.discard(child)
        # Defensive: the loop visits every child once, so nothing remains.
        ungrouped.extend(sorted(unassigned))
    return GroupingResult(groups=groups, ungrouped=sorted(ungrouped))
