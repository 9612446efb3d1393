"""Slotted schedule construction: dedicated cells and shared group windows.

A slotframe of fixed length repeats forever; each slot holds at most one
cell per channel offset. A dedicated cell carries exactly one packet over
one link per frame. A group window is a contiguous run of slots on one
channel inside which a group's members contend with CSMA toward their
shared parent; it trades the one-packet-per-slot guarantee for airtime
packing (a contended transaction is shorter than a slot).

Placement rules enforced here:
  * no two cells or windows share a (slot, channel) pair;
  * a node is busy in at most one cell or window per slot, except the
    coordinator, which may receive on up to `sink_radios` channels at once;
  * the first `reserved_slots` slots of every frame carry beacons and hold
    no data.

When demand exceeds frame capacity, every link is scaled back
proportionally (largest-remainder rounding) so relays keep pace with their
subtrees instead of a few big links starving everyone downstream. The
shortfall is reported per link, never silently dropped.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .grouping import GroupingResult
from .topology import COORDINATOR, NodeId, Topology

SCHEDULE_FORMAT = "schedule/1"

# Longest contiguous group window placed as one piece; larger allocations
# split into chunks spread across the slotframe.
WINDOW_CHUNK_SLOTS = 12


@dataclass(frozen=True)
class ScheduleParams:
    slot_us: int = 10_000
    slotframe_len: "int | None" = None  # None: max(node count, 100)
    channels: int = 16
    reserved_slots: int = 2
    sink_radios: int = 1

    def frame_len(self, n_nodes: int) -> int:
        return self.slotframe_len if self.slotframe_len is not None else max(n_nodes, 100)


@dataclass(frozen=True)
class Cell:
    slot: int
    channel: int
    sender: NodeId
    receiver: NodeId


@dataclass(frozen=True)
class GroupWindow:
    slot: int
    length: int
    channel: int
    group_id: int
    receiver: NodeId
    members: tuple[NodeId, ...]


@dataclass
class Slotframe:
    length: int
    channels: int
    slot_us: int
    reserved_slots: int
    sink_radios: int
    cells: list[Cell] = field(default_factory=list)
    windows: list[GroupWindow] = field(default_factory=list)

    @property
    def frame_us(self) -> int:
        return self.length * self.slot_us

    @property
    def frame_s(self) -> float:
        return self.frame_us / 1e6

    def validate(self) -> None:
        """Re-check every placement invariant from scratch."""
        used: set[tuple[int, int]] = set()
        busy: dict[NodeId, set[int]] = {}
        sink_rx: dict[int, int] = {}

        def occupy(node: NodeId, slot: int, as_sink_rx: bool) -> None:
            if as_sink_rx:
                sink_rx[slot] = sink_rx.get(slot, 0) + 1
                if sink_rx[slot] > self.sink_radios:
                    raise ValueError(
                        f"coordinator receives on {sink_rx[slot]} channels in slot "
                        f"{slot}, over the {self.sink_radios}-radio limit"
                    )
                return
            slots = busy.setdefault(node, set())
            if slot in slots:
                raise ValueError(f"node {node} is double-booked in slot {slot}")
            slots.add(slot)

        def claim(slot: int, channel: int) -> None:
            if not (self.reserved_slots <= slot < self.length):
                raise ValueError(f"slot {slot} outside the data region")
            if not (0 <= channel < self.channels):
                raise ValueError(f"channel {channel} out of range")
            if (slot, channel) in used:
                raise ValueError(f"(slot {slot}, channel {channel}) claimed twice")
            used.add((slot, channel))

        for c in self.cells:
            claim(c.slot, c.channel)
            occupy(c.sender, c.slot, as_sink_rx=False)
            occupy(c.receiver, c.slot, as_sink_rx=(c.receiver == COORDINATOR))
        for w in self.windows:
            if w.length < 1:
                raise ValueError(f"window for group {w.group_id} has no slots")
            for s in range(w.slot, w.slot + w.length):
                claim(s, w.channel)
                for m in w.members:
                    occupy(m, s, as_sink_rx=False)
                occupy(w.receiver, s, as_sink_rx=(w.receiver == COORDINATOR))

    def to_json_doc(self) -> dict:
        return {
            "format": SCHEDULE_FORMAT,
            "length": self.length,
            "channels": self.channels,
            "slot_us": self.slot_us,
            "reserved_slots": self.reserved_slots,
            "sink_radios": self.sink_radios,
            "cells": [
                {"slot": c.slot, "channel": c.channel, "sender": c.sender, "receiver": c.receiver}
                for c in self.cells
            ],
            "windows": [
                {
                    "slot": w.slot,
                    "length": w.length,
                    "channel": w.channel,
                    "group_id": w.group_id,
                    "receiver": w.receiver,
                    "members": list(w.members),
                }
                for w in self.windows
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_doc(), sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Slotframe":
        doc = json.loads(text)
        if doc.get("format") != SCHEDULE_FORMAT:
            raise ValueError(f"unsupported schedule format {doc.get('format')!r}")
        return cls(
            length=doc["length"],
            channels=doc["channels"],
            slot_us=doc["slot_us"],
            reserved_slots=doc["reserved_slots"],
            sink_radios=doc["sink_radios"],
            cells=[Cell(**rec) for rec in doc["cells"]],
            windows=[
                GroupWindow(
                    slot=rec["slot"],
                    length=rec["length"],
                    channel=rec["channel"],
                    group_id=rec["group_id"],
                    receiver=rec["receiver"],
                    members=tuple(rec["members"]),
                )
                for rec in doc["windows"]
            ],
        )


@dataclass
class ScheduleResult:
    slotframe: Slotframe
    satisfied: dict[NodeId, float]
    unsatisfied: dict[NodeId, float]

    @property
    def capacity_exceeded(self) -> bool:
        return any(v > 1e-9 for v in self.unsatisfied.values())


def compute_demands(topology: Topology, rate_pps: float, frame_s: float) -> list[float]:
    """Uplink packets per frame for each node: own traffic plus everything relayed."""
    sizes = topology.subtree_sizes()
    return [
        0.0 if i == COORDINATOR else sizes[i] * rate_pps * frame_s
        for i in range(topology.n)
    ]


class _Occupancy:
    def __init__(self, frame: Slotframe):
        self.frame = frame
        self.used: set[tuple[int, int]] = set()
        self.busy: dict[NodeId, set[int]] = {}
        self.sink_rx: dict[int, int] = {}

    def node_free(self, node: NodeId, slot: int, receiving: bool) -> bool:
        if node == COORDINATOR and receiving:
            return self.sink_rx.get(slot, 0) < self.frame.sink_radios
        return slot not in self.busy.get(node, ())

    def channel_for(self, slot: int) -> "int | None":
        for ch in range(self.frame.channels):
            if (slot, ch) not in self.used:
                return ch
        return None

    def span_channel(self, start: int, length: int) -> "int | None":
        for ch in range(self.frame.channels):
            if all((s, ch) not in self.used for s in range(start, start + length)):
                return ch
        return None

    def occupy(self, node: NodeId, slot: int, receiving: bool) -> None:
        if node == COORDINATOR and receiving:
            self.sink_rx[slot] = self.sink_rx.get(slot, 0) + 1
        else:
            self.busy.setdefault(node, set()).add(slot)


def _largest_remainder(demands: list[tuple[NodeId, float]], capacity: int) -> dict[NodeId, int]:
    """Integer shares proportional to demand, summing to at most capacity."""
    total = sum(d for _, d in demands)
    if total <= 0:
        return {i: 0 for i, _ in demands}
    quotas = [(i, d * capacity / total) for i, d in demands]
    grants = {i: int(math.floor(q)) for i, q in quotas}
    leftover = capacity - sum(grants.values())
    by_frac = sorted(quotas, key=lambda iq: (-(iq[1] - math.floor(iq[1])), iq[0]))
    for i, _ in by_frac:
        if leftover <= 0:
            break
        grants[i] += 1
        leftover -= 1
    return grants


def _stride_targets(count: int, usable: int, reserved: int, phase: float) -> list[int]:
    """Evenly spaced slot targets with a per-owner phase offset."""
    off = int(phase * usable)
    return [reserved + (math.floor(j * usable / count) + off) % usable for j in range(count)]


def _place_link_cells(
    occ: _Occupancy,
    frame: Slotframe,
    sender: NodeId,
    receiver: NodeId,
    count: int,
    phase: float,
) -> int:
    """Place up to `count` cells for one link, spread across the frame."""
    usable = frame.length - frame.reserved_slots
    placed = 0
    for target in _stride_targets(count, usable, frame.reserved_slots, phase):
        done = False
        for k in range(usable):
            slot = frame.reserved_slots + (target - frame.reserved_slots + k) % usable
            if not occ.node_free(sender, slot, receiving=False):
                continue
            if not occ.node_free(receiver, slot, receiving=True):
                continue
            ch = occ.channel_for(slot)
            if ch is None:
                continue
            occ.used.add((slot, ch))
            occ.occupy(sender, slot, receiving=False)
            occ.occupy(receiver, slot, receiving=True)
            frame.cells.append(Cell(slot=slot, channel=ch, sender=sender, receiver=receiver))
            placed += 1
            done = True
            break
        if not done:
            break
    return placed


def _place_window(
    occ: _Occupancy,
    frame: Slotframe,
    group_id: int,
    receiver: NodeId,
    members: tuple[NodeId, ...],
    span: int,
    target: int,
) -> "GroupWindow | None":
    """Place one contiguous window, probing outward from its target start.

    When no gap of the full span exists anywhere, the span shrinks until
    something fits; the caller reads the shortfall off the result.
    """
    usable = frame.length - frame.reserved_slots
    span = min(span, usable)
    first = frame.reserved_slots
    while span >= 1:
        last = frame.length - span  # inclusive max start
        n_starts = last - first + 1
        base = min(max(target, first), last)
        for k in range(n_starts):
            start = first + (base - first + k) % n_starts
            slots = range(start, start + span)
            if not all(occ.node_free(receiver, s, receiving=True) for s in slots):
                continue
            if not all(occ.node_free(m, s, receiving=False) for m in members for s in slots):
                continue
            ch = occ.span_channel(start, span)
            if ch is None:
                continue
            for s in slots:
                occ.used.add((s, ch))
                occ.occupy(receiver, s, receiving=True)
                for m in members:
                    occ.occupy(m, s, receiving=False)
            win = GroupWindow(
                slot=start,
                length=span,
                channel=ch,
                group_id=group_id,
                receiver=receiver,
                members=members,
            )
            frame.windows.append(win)
            return win
        span -= 1
    return None


def build_tsch_schedule(
    topology: Topology,
    demands: list[float],
    params: ScheduleParams,
) -> ScheduleResult:
    """Dedicated cells for every uplink, one cell per packet per frame.

    Each link asks for ceil(demand) cells. If the frame cannot hold the
    total, links receive proportional shares instead, so a relay's
    allocation tracks the traffic its subtree can actually offer it.
    """
    frame = Slotframe(
        length=params.frame_len(topology.n),
        channels=params.channels,
        slot_us=params.slot_us,
        reserved_slots=params.reserved_slots,
        sink_radios=params.sink_radios,
    )
    links = [
        (i, demands[i])
        for i in range(topology.n)
        if i != COORDINATOR and demands[i] > 0
    ]
    requested = {i: math.ceil(d) for i, d in links}
    capacity = (frame.length - frame.reserved_slots) * frame.channels
    if sum(requested.values()) <= capacity:
        grants = dict(requested)
    else:
        grants = _largest_remainder(links, capacity)

    # The sink's receive budget (usable slots x radios) can bind before the
    # channel grid does. Scale the sink-bound links inside it, or saturation
    # would serve whole links in placement order instead of sharing the
    # bottleneck.
    sink_links = [(i, d) for i, d in links if topology.node(i).parent == COORDINATOR]
    sink_budget = (frame.length - frame.reserved_slots) * min(
        params.sink_radios, frame.channels
    )
    if sum(grants[i] for i, _ in sink_links) > sink_budget:
        sink_grants = _largest_remainder(sink_links, sink_budget)
        for i, _ in sink_links:
            grants[i] = min(grants[i], sink_grants[i])

    occ = _Occupancy(frame)
    order = sorted(links, key=lambda ld: (-grants[ld[0]], ld[0]))
    n_links = max(len(links), 1)
    phase_of = {i: rank / n_links for rank, (i, _) in enumerate(sorted(links))}
    satisfied: dict[NodeId, float] = {}
    unsatisfied: dict[NodeId, float] = {}
    placed_count: dict[NodeId, int] = {}
    for i, _d in order:
        want = grants[i]
        if want == 0:
            placed = 0
        else:
            placed = _place_link_cells(
                occ, frame, i, topology.node(i).parent, want, phase_of[i]
            )
        placed_count[i] = placed

    # Repair pass: a link whose stride targets collided may still fit once
    # its neighbours have settled, so shorted links retry in small batches.
    # Targets stay at the proportional grants — handing a link more than its
    # share would outrun what its subtree can feed it. A link that fails a
    # placement stays dead: occupancy only ever grows.
    alive = {i for i, _ in links if grants[i] > placed_count[i]}
    while alive:
        progress = False
        for i in sorted(alive, key=lambda i: (-(grants[i] - placed_count[i]), i)):
            batch = min(grants[i] - placed_count[i], 4)
            got = _place_link_cells(
                occ, frame, i, topology.node(i).parent, batch, phase_of[i]
            )
            placed_count[i] += got
            if got:
                progress = True
            if got < batch or grants[i] == placed_count[i]:
                alive.discard(i)
        if not progress:
            break

    for i, _d in links:
        satisfied[i] = float(placed_count[i])
        short = requested[i] - placed_count[i]
        if short > 0:
            unsatisfied[i] = float(short)
    frame.cells.sort(key=lambda c: (c.slot, c.channel))
    return ScheduleResult(slotframe=frame, satisfied=satisfied, unsatisfied=unsatisfied)


def hybrid_window_span(group_demand: float, txn_us: int, slot_us: int, margin: float) -> int:
    """Slots needed for a group's frame demand: airtime share plus slack margin."""
    if group_demand <= 0:
        return 0
    return max(1, math.ceil(group_demand * (txn_us / slot_us) * margin))


def build_hybrid_schedule(
    topology: Topology,
    grouping: GroupingResult,
    demands: list[float],
    params: ScheduleParams,
    margin: float = 1.5,
    txn_us: int = 4000,
) -> ScheduleResult:
    """Group windows for grouped members, dedicated cells for everyone else.

    With no groups at all this reduces exactly to build_tsch_schedule.
    """
    if not grouping.groups:
        return build_tsch_schedule(topology, demands, params)

    frame = Slotframe(
        length=params.frame_len(topology.n),
        channels=params.channels,
        slot_us=params.slot_us,
        reserved_slots=params.reserved_slots,
        sink_radios=params.sink_radios,
    )
    usable = frame.length - frame.reserved_slots
    capacity = usable * frame.channels

    grouped = set()
    for g in grouping.groups:
        grouped.update(g.members)
    loose_links = [
        (i, demands[i])
        for i in range(topology.n)
        if i != COORDINATOR and i not in grouped and demands[i] > 0
    ]
    group_demand = {
        g.group_id: sum(demands[m] for m in g.members) for g in grouping.groups
    }
    slot_cost = (txn_us / frame.slot_us) * margin  # slots per packet in a window

    # Members of one group share airtime, but every member listed on a
    # window blocks its whole span for other duties. Relays that also face
    # heavy inbound traffic cannot afford that, so each group's span is
    # split among member "parties": light members pool into a shared window,
    # heavy members stand alone and block only their own share.
    def pack_parties(g, alpha: float) -> list[tuple[tuple[NodeId, ...], int]]:
        shares = sorted(
            ((m, alpha * demands[m] * slot_cost) for m in g.members if demands[m] > 0),
            key=lambda ms: (-ms[1], ms[0]),
        )
        parties: list[list] = []  # [member list, fractional span]
        for m, s in shares:
            for p in parties:
                if p[1] + s <= WINDOW_CHUNK_SLOTS:
                    p[0].append(m)
                    p[1] += s
                    break
            else:
                parties.append([[m], s])
        return [
            (tuple(sorted(members)), max(1, math.ceil(span)))
            for members, span in parties
        ]

    def total_units(alpha: float) -> int:
        units = 0
        for g in grouping.groups:
            units += sum(span for _m, span in pack_parties(g, alpha))
        for _i, d in loose_links:
            units += math.ceil(alpha * d)
        return units

    alpha = 1.0
    if total_units(1.0) > capacity:
        lo_a, hi_a = 0.0, 1.0
        for _ in range(48):
            mid = (lo_a + hi_a) / 2.0
            if total_units(mid) <= capacity:
                lo_a = mid
            else:
                hi_a = mid
        alpha = lo_a

    occ = _Occupancy(frame)
    receivers = sorted({g.parent for g in grouping.groups})
    rec_phase = {r: idx / len(receivers) for idx, r in enumerate(receivers)}
    by_receiver: dict[NodeId, list] = {}
    for g in sorted(grouping.groups, key=lambda g: (-group_demand[g.group_id], g.group_id)):
        by_receiver.setdefault(g.parent, []).append(g)

    satisfied: dict[NodeId, float] = {}
    unsatisfied: dict[NodeId, float] = {}

    # Each party's span splits into chunks spread across the frame: long
    # contiguous runs rarely survive channel fragmentation, and spreading
    # a busy party's airtime smooths the inflow at its parent.
    parties = []  # (party_id, group, members, span)
    for r in receivers:
        for g in by_receiver[r]:
            for members, span in pack_parties(g, alpha):
                parties.append((len(parties), g, members, span))
    window_plan = []  # (chunk_span, party_id, target)
    for r in receivers:
        mine = [p for p in parties if p[1].parent == r]
        targets = _stride_targets(len(mine), usable, frame.reserved_slots, rec_phase[r])
        for (pid, g, members, span), target in zip(mine, targets):
            n_chunks = math.ceil(span / WINDOW_CHUNK_SLOTS)
            base, extra = divmod(span, n_chunks)
            for j in range(n_chunks):
                chunk = base + (1 if j < extra else 0)
                offset = (target + (j * usable) // n_chunks) % usable + frame.reserved_slots
                window_plan.append((chunk, pid, offset))
    # Biggest chunks first: contiguous spans are the hardest to fit.
    window_plan.sort(key=lambda spt: (-spt[0], spt[1], spt[2]))
    plan_span = {pid: span for pid, _g, _m, span in parties}
    placed_span = {pid: 0 for pid, _g, _m, _s in parties}
    by_pid = {pid: (g, members) for pid, g, members, _s in parties}
    target_of = {pid: t for _s, pid, t in window_plan}
    for chunk, pid, target in window_plan:
        g, members = by_pid[pid]
        win = _place_window(occ, frame, g.group_id, g.parent, members, chunk, target)
        if win is not None:
            placed_span[pid] += win.length

    # Repair pass, mirroring the cell builder: chunks that lost their spot
    # retry until the plan spans are met or nothing more fits. The plan stays
    # the ceiling — a window wider than the party's share would sit idle,
    # starved by the proportional allocations upstream of it.
    alive = {pid for pid, want in plan_span.items() if want > placed_span[pid]}
    while alive:
        progress = False
        for pid in sorted(alive, key=lambda pid: (-(plan_span[pid] - placed_span[pid]), pid)):
            g, members = by_pid[pid]
            chunk = min(plan_span[pid] - placed_span[pid], WINDOW_CHUNK_SLOTS)
            win = _place_window(
                occ, frame, g.group_id, g.parent, members, chunk, target_of.get(pid, 0)
            )
            got = win.length if win else 0
            placed_span[pid] += got
            if got:
                progress = True
            if got < chunk or placed_span[pid] >= plan_span[pid]:
                alive.discard(pid)
        if not progress:
            break

    for pid, _g, members, _span in parties:
        # Packets the placed span can carry, shared by traffic share.
        carried = placed_span[pid] / slot_cost
        total = sum(demands[m] for m in members)
        for m in members:
            satisfied[m] = min(demands[m], carried * demands[m] / total)
            short = demands[m] - satisfied[m]
            if short > 1e-9:
                unsatisfied[m] = short
    for g in grouping.groups:
        for m in g.members:
            satisfied.setdefault(m, 0.0)

    requested = {i: math.ceil(d) for i, d in loose_links}
    grants = {i: math.ceil(alpha * d) for i, d in loose_links}
    # Same sink-budget guard as the cell builder, minus whatever the group
    # windows already claimed of the coordinator's listening time.
    sink_loose = [(i, d) for i, d in loose_links if topology.node(i).parent == COORDINATOR]
    window_sink_slots = sum(w.length for w in frame.windows if w.receiver == COORDINATOR)
    sink_budget = usable * min(params.sink_radios, frame.channels) - window_sink_slots
    if sum(grants[i] for i, _ in sink_loose) > sink_budget:
        sink_grants = _largest_remainder(sink_loose, max(sink_budget, 0))
        for i, _ in sink_loose:
            grants[i] = min(grants[i], sink_grants[i])
    n_links = max(len(loose_links), 1)
    phase_of = {i: rank / n_links for rank, (i, _) in enumerate(sorted(loose_links))}
    placed_count = {i: 0 for i, _ in loose_links}
    for i, _d in sorted(loose_links, key=lambda ld: (-grants[ld[0]], ld[0])):
        if grants[i]:
            placed_count[i] = _place_link_cells(
                occ, frame, i, topology.node(i).parent, grants[i], phase_of[i]
            )
    alive = {i for i, _ in loose_links if grants[i] > placed_count[i]}
    while alive:
        progress = False
        for i in sorted(alive, key=lambda i: (-(grants[i] - placed_count[i]), i)):
            batch = min(grants[i] - placed_count[i], 4)
            got = _place_link_cells(
                occ, frame, i, topology.node(i).parent, batch, phase_of[i]
            )
            placed_count[i] += got
            if got:
                progress = True
            if got < batch or grants[i] == placed_count[i]:
                alive.discard(i)
        if not progress:
            break
    for i, _d in loose_links:
        satisfied[i] = float(placed_count[i])
        short = requested[i] - placed_count[i]
        if short > 0:
            unsatisfied[i] = float(short)

    frame.cells.sort(key=lambda c: (c.slot, c.channel))
    frame.windows.sort(key=lambda w: (w.slot, w.channel))
    return ScheduleResult(slotframe=frame, satisfied=satisfied, unsatisfied=unsatisfied)
