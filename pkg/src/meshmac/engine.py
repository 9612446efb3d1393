"""Discrete-event execution of a single run.

One integer-microsecond clock drives everything. Events pop in (time, seq)
order with seq assigned at push, so identical configurations replay the
exact same event sequence; determinism is checked by hashing the trace.

Three modes share the loop:

  csma        every node contends on one shared channel, forwarding along
              the routing tree. Clear-channel assessment sees radio
              neighbors only, so hidden traffic collides at receivers.
  tsch        dedicated cells move one packet per slot, conflict-free by
              schedule construction; nothing ever collides.
  scg_hybrid  grouped members contend inside their group's window (channel
              isolation comes from the schedule), everyone else uses
              dedicated cells.

Packets are owned by their origin for accounting: wherever a packet dies,
the drop is charged to the node that generated it, so per-origin
generated = delivered + dropped + in-flight holds exactly at the end.
"""

from __future__ import annotations

import hashlib
import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from . import csma as mac
from .errors import ConfigError
from .grouping import GroupingResult
from .topology import COORDINATOR, Topology
from .tsch import GroupWindow, Slotframe
from .streams import BACKOFF, TRAFFIC, make_rng

MODE_CSMA = "csma"
MODE_TSCH = "tsch"
MODE_HYBRID = "scg_hybrid"
MODES = (MODE_CSMA, MODE_TSCH, MODE_HYBRID)

CSMA_CHANNEL = 0


class EventKind(IntEnum):
    ARRIVAL = 1
    BACKOFF_EXPIRY = 2
    CCA_CHECK = 3
    TX_START = 4
    TX_END = 5
    ACK = 6
    SLOT_BOUNDARY = 7


class EventQueue:
    """Min-heap of (time_us, seq, kind, payload) with monotonicity asserted."""

    def __init__(self) -> None:
        self._heap: list[tuple[int, int, int, tuple]] = []
        self._seq = 0
        self._last: tuple[int, int] = (-1, -1)

    def push(self, time_us: int, kind: EventKind, payload: tuple) -> None:
        heapq.heappush(self._heap, (time_us, self._seq, int(kind), payload))
        self._seq += 1

    def pop(self) -> tuple[int, int, EventKind, tuple]:
        time_us, seq, kind, payload = heapq.heappop(self._heap)
        if (time_us, seq) <= self._last:
            raise AssertionError("event queue popped out of order")
        self._last = (time_us, seq)
        return time_us, seq, EventKind(kind), payload

    def __bool__(self) -> bool:
        return bool(self._heap)


@dataclass
class Packet:
    origin: int
    pkt_id: int
    created_us: int
    cohort: bool  # generated inside the measurement window


@dataclass
class Transmission:
    key: int
    channel: int
    sender: int
    receiver: int
    start_us: int
    end_us: int
    packet: Packet


class ChannelState:
    """Active and recently ended transmissions per channel offset."""

    def __init__(self) -> None:
        self.active: dict[int, dict[int, Transmission]] = {}
        self.recent: dict[int, list[Transmission]] = {}
        self._max_dur = 0

    def add(self, t: Transmission) -> None:
        self.active.setdefault(t.channel, {})[t.key] = t
        self._max_dur = max(self._max_dur, t.end_us - t.start_us)

    def remove(self, t: Transmission) -> None:
        del self.active[t.channel][t.key]
        self.recent.setdefault(t.channel, []).append(t)

    def audible_senders(self, channel: int, now_us: int) -> list[int]:
        """Senders whose signal occupies the channel strictly inside (start, end).

        A transmission starting exactly now is not audible yet: two nodes
        whose assessments share a microsecond both see clear and collide.
        """
        return [
            t.sender
            for t in self.active.get(channel, {}).values()
            if t.start_us < now_us < t.end_us
        ]

    def overlapping(self, channel: int, start_us: int, end_us: int, exclude_key: int) -> list[Transmission]:
        out = []
        for t in self.active.get(channel, {}).values():
            if t.key != exclude_key and t.start_us < end_us and t.end_us > start_us:
                out.append(t)
        for t in self.recent.get(channel, []):
            if t.key != exclude_key and t.start_us < end_us and t.end_us > start_us:
                out.append(t)
        return out

    def prune(self, now_us: int) -> None:
        horizon = now_us - 2 * self._max_dur - 1
        for channel, lst in self.recent.items():
            if lst and lst[0].end_us < horizon:
                self.recent[channel] = [t for t in lst if t.end_us >= horizon]


def resolve_reception(
    channel: ChannelState,
    receiver_neighbors: frozenset,
    transmission: Transmission,
) -> bool:
    """True when the reception survives: no audible overlap at the receiver.

    Audible means the interfering sender is a radio neighbor of the
    receiver, or is the receiver itself (a transmitting radio hears
    nothing). Overlap elsewhere is harmless; collisions happen at receivers.
    """
    t = transmission
    for other in channel.overlapping(t.channel, t.start_us, t.end_us, t.key):
        if other.sender == t.receiver or other.sender in receiver_neighbors:
            return False
    return True


def generate_traffic(rate_pps: float, duration_us: int, rng: np.random.Generator) -> list[int]:
    """Periodic arrival times with a uniformly random phase, strictly before the end."""
    if rate_pps <= 0:
        return []
    period = max(1, int(round(1e6 / rate_pps)))
    phase = int(rng.integers(0, period))
    return list(range(phase, duration_us, period))


@dataclass
class RunConfig:
    topology: Topology
    mode: str
    rate_pps: float
    duration_s: float
    seed: int
    warmup_fraction: float = 0.1
    queue_cap: int = 64
    csma: mac.BackoffParams = field(default_factory=mac.BackoffParams)
    group_csma: mac.BackoffParams = field(
        default_factory=lambda: mac.BackoffParams(
            c_nb=0, c_be=1, max_attempts=16, unit_backoff_us=250, txn_duration_us=4000
        )
    )
    entry_jitter_us: int = 1000
    schedule: "Slotframe | None" = None
    grouping: "GroupingResult | None" = None
    trace: bool = False


@dataclass
class RunMetrics:
    n: int
    duration_us: int
    warmup_us: int
    generated: list[int]
    delivered: list[int]
    dropped: list[int]
    in_flight: list[int]
    collided: list[int]
    delivered_series: list[int]
    delivered_in_window: int
    trace_hash: "str | None" = None

    @property
    def window_s(self) -> float:
        return (self.duration_us - self.warmup_us) / 1e6

    @property
    def total_generated(self) -> int:
        return sum(self.generated)

    @property
    def total_delivered(self) -> int:
        return sum(self.delivered)

    @property
    def total_dropped(self) -> int:
        return sum(self.dropped)

    @property
    def total_in_flight(self) -> int:
        return sum(self.in_flight)

    @property
    def total_collisions(self) -> int:
        return sum(self.collided)


class _NodeState:
    __slots__ = ("queue", "txn", "current", "token", "windows")

    def __init__(self) -> None:
        self.queue: deque[Packet] = deque()
        self.txn: "mac.CsmaTransaction | None" = None
        self.current: "Packet | None" = None
        self.token = 0
        self.windows: tuple[GroupWindow, ...] = ()


class _Sim:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.topo = cfg.topology
        self.n = self.topo.n
        self.duration_us = int(round(cfg.duration_s * 1e6))
        self.warmup_us = int(self.duration_us * cfg.warmup_fraction)
        self.now = 0
        self.events = EventQueue()
        self.channel = ChannelState()
        self.nodes = [_NodeState() for _ in range(self.n)]
        self.parent = [nd.parent for nd in self.topo.nodes]
        self.neighbors = [nd.neighbors for nd in self.topo.nodes]
        self._tx_serial = 0
        self._pkt_serial = 0
        self.live_tx: dict[int, tuple[Transmission, int]] = {}  # key -> (txn record, node)

        self.generated = [0] * self.n
        self.delivered = [0] * self.n
        self.dropped = [0] * self.n
        self.collided = [0] * self.n
        self.delivered_in_window = 0
        n_secs = max(1, math.ceil(cfg.duration_s))
        self.series = [0] * n_secs

        self._hasher = hashlib.sha256() if cfg.trace else None

        self._traffic_rng = [make_rng(cfg.seed, TRAFFIC, i) for i in range(self.n)]
        self._backoff_rng = [make_rng(cfg.seed, BACKOFF, i) for i in range(self.n)]

        self._validate()
        self._index_schedule()

    # -- setup ---------------------------------------------------------

    def _validate(self) -> None:
        cfg = self.cfg
        if cfg.mode not in MODES:
            raise ConfigError(f"unknown mode {cfg.mode!r}")
        if cfg.duration_s <= 0:
            raise ConfigError("duration must be positive")
        if not 0 <= cfg.warmup_fraction < 1:
            raise ConfigError("warmup fraction must be in [0, 1)")
        if cfg.queue_cap < 1:
            raise ConfigError("queue capacity must be at least 1")
        if cfg.mode in (MODE_TSCH, MODE_HYBRID) and cfg.schedule is None:
            raise ConfigError(f"mode {cfg.mode} requires a schedule")
        if cfg.mode == MODE_HYBRID and cfg.grouping is None:
            raise ConfigError("hybrid mode requires a grouping")
        if cfg.mode == MODE_CSMA and cfg.schedule is not None:
            raise ConfigError("csma mode does not take a schedule")

    def _index_schedule(self) -> None:
        self.cells_by_slot: dict[int, list] = {}
        self.windows_by_slot: dict[int, list[GroupWindow]] = {}
        sched = self.cfg.schedule
        if sched is None:
            return
        for c in sched.cells:
            self.cells_by_slot.setdefault(c.slot, []).append(c)
        for lst in self.cells_by_slot.values():
            lst.sort(key=lambda c: c.channel)
        member_windows: dict[int, list[GroupWindow]] = {}
        for w in sched.windows:
            self.windows_by_slot.setdefault(w.slot, []).append(w)
            for m in w.members:
                member_windows.setdefault(m, []).append(w)
        for lst in self.windows_by_slot.values():
            lst.sort(key=lambda w: w.channel)
        for m, lst in member_windows.items():
            self.nodes[m].windows = tuple(sorted(lst, key=lambda w: (w.slot, w.channel)))

    def _params_for(self, node: int) -> mac.BackoffParams:
        if self.cfg.mode == MODE_HYBRID and self.nodes[node].windows:
            return self.cfg.group_csma
        return self.cfg.csma

    # -- trace ---------------------------------------------------------

    def _trace(self, kind: str, detail: str) -> None:
        if self._hasher is not None:
            self._hasher.update(f"{self.now} {kind} {detail}\n".encode())

    # -- window geometry -----------------------------------------------

    def _window_instance(self, w: GroupWindow) -> tuple[int, int]:
        """Absolute (start, end) of the window instance in the current frame."""
        frame_us = self.cfg.schedule.frame_us
        frame = self.now // frame_us
        start = frame * frame_us + w.slot * self.cfg.schedule.slot_us
        return start, start + w.length * self.cfg.schedule.slot_us

    def _open_window(self, node: int, txn_duration_us: int) -> "GroupWindow | None":
        """The member's window whose current instance can still hold one transaction.

        A member's windows never share a slot, so at most one matches.
        """
        for w in self.nodes[node].windows:
            start, end = self._window_instance(w)
            if start <= self.now and self.now + txn_duration_us <= end:
                return w
        return None

    def _fits_window(self, node: int, txn_duration_us: int) -> bool:
        if not self.nodes[node].windows:
            return True  # plain csma: the whole timeline is open
        return self._open_window(node, txn_duration_us) is not None

    # -- run loop --------------------------------------------------------

    def run(self) -> RunMetrics:
        for node in range(1, self.n):
            for t in generate_traffic(self.cfg.rate_pps, self.duration_us, self._traffic_rng[node]):
                self.events.push(t, EventKind.ARRIVAL, (node,))
        if self.cfg.schedule is not None:
            frame_us = self.cfg.schedule.frame_us
            slot_us = self.cfg.schedule.slot_us
            for slot in sorted(set(self.cells_by_slot) | set(self.windows_by_slot)):
                t0 = slot * slot_us
                if t0 <= self.duration_us:
                    self.events.push(t0, EventKind.SLOT_BOUNDARY, (slot,))

        while self.events:
            time_us, _seq, kind, payload = self.events.pop()
            if time_us > self.duration_us:
                break
            self.now = time_us
            if kind == EventKind.ARRIVAL:
                self._on_arrival(*payload)
            elif kind == EventKind.BACKOFF_EXPIRY:
                self._on_backoff_expiry(*payload)
            elif kind == EventKind.TX_END:
                self._on_tx_end(*payload)
            elif kind == EventKind.SLOT_BOUNDARY:
                self._on_slot_boundary(*payload)
            else:  # pragma: no cover - no other kinds are queued
                raise AssertionError(f"unexpected queued event {kind}")

        return self._finish()

    # -- handlers --------------------------------------------------------

    def _on_arrival(self, node: int) -> None:
        cohort = self.now >= self.warmup_us
        pkt = Packet(origin=node, pkt_id=self._pkt_serial, created_us=self.now, cohort=cohort)
        self._pkt_serial += 1
        if cohort:
            self.generated[node] += 1
        self._trace("arrival", f"n{node} p{pkt.pkt_id}")
        self._enqueue(node, pkt)

    def _enqueue(self, node: int, pkt: Packet) -> None:
        st = self.nodes[node]
        if len(st.queue) >= self.cfg.queue_cap:
            self._drop(pkt, "queue_full", node)
            return
        st.queue.append(pkt)
        self._kick(node)

    def _kick(self, node: int, jitter_us: int = 0) -> None:
        """Start a transaction if this node contends and may send right now."""
        st = self.nodes[node]
        if st.txn is not None or not st.queue:
            return
        mode = self.cfg.mode
        if mode == MODE_TSCH:
            return
        if mode == MODE_HYBRID and not st.windows:
            return
        params = self._params_for(node)
        if mode == MODE_HYBRID and not self._fits_window(node, params.txn_duration_us):
            return
        st.current = st.queue.popleft()
        st.txn = mac.CsmaTransaction(
            sender=node, receiver=self.parent[node], packet_id=st.current.pkt_id
        )
        slots = mac.draw_backoff(params, st.txn.attempt, self._backoff_rng[node])
        self._schedule_expiry(node, jitter_us + slots * params.unit_backoff_us)

    def _schedule_expiry(self, node: int, delay_us: int) -> None:
        st = self.nodes[node]
        st.token += 1
        self.events.push(self.now + delay_us, EventKind.BACKOFF_EXPIRY, (node, st.token))

    def _on_backoff_expiry(self, node: int, token: int) -> None:
        st = self.nodes[node]
        if token != st.token or st.txn is None or st.txn.state is not mac.TxnState.BACKING_OFF:
            return  # superseded by a park/resume
        params = self._params_for(node)
        if not self._fits_window(node, params.txn_duration_us):
            return  # parked; the next window start resumes this transaction
        mac.advance_transaction(st.txn, mac.TxnEvent.BACKOFF_EXPIRED, params, self._backoff_rng[node])
        channel = self._channel_of(node)
        busy = mac.cca(self.channel.audible_senders(channel, self.now), self.neighbors[node])
        self._trace("cca_check", f"n{node} {'busy' if busy else 'clear'}")
        outcome = mac.TxnEvent.CCA_BUSY if busy else mac.TxnEvent.CCA_CLEAR
        actions = mac.advance_transaction(st.txn, outcome, params, self._backoff_rng[node])
        self._apply_actions(node, actions)

    def _channel_of(self, node: int) -> int:
        if not self.nodes[node].windows:
            return CSMA_CHANNEL
        w = self._open_window(node, self._params_for(node).txn_duration_us)
        if w is None:  # pragma: no cover - guarded by _fits_window upstream
            raise AssertionError(f"node {node} has no open window at {self.now}")
        return w.channel

    def _apply_actions(self, node: int, actions: list) -> None:
        st = self.nodes[node]
        for act in actions:
            if isinstance(act, mac.ScheduleBackoff):
                self._schedule_expiry(node, act.delay_us)
            elif isinstance(act, mac.StartTransmission):
                key = self._tx_serial
                self._tx_serial += 1
                t = Transmission(
                    key=key,
                    channel=self._channel_of(node),
                    sender=node,
                    receiver=st.txn.receiver,
                    start_us=self.now,
                    end_us=self.now + act.duration_us,
                    packet=st.current,
                )
                self.channel.add(t)
                self.live_tx[key] = (t, node)
                self._trace("tx_start", f"n{node} p{st.current.pkt_id} a{st.txn.attempt}")
                self.events.push(t.end_us, EventKind.TX_END, (key,))
            elif isinstance(act, mac.DropPacket):
                pkt = st.current
                st.txn = None
                st.current = None
                self._drop(pkt, "retries_exhausted", node)
                self._kick(node)
            elif isinstance(act, mac.Complete):
                receiver = st.txn.receiver
                pkt = st.current
                st.txn = None
                st.current = None
                self._trace("ack", f"n{node} p{pkt.pkt_id}")
                self._deliver(receiver, pkt)
                self._kick(node)
            else:  # pragma: no cover
                raise AssertionError(f"unknown action {act!r}")

    def _on_tx_end(self, key: int) -> None:
        t, node = self.live_tx.pop(key)
        st = self.nodes[node]
        self.channel.remove(t)
        self.channel.prune(self.now)
        ok = resolve_reception(self.channel, self.neighbors[t.receiver], t)
        self._trace("tx_end", f"n{node} p{t.packet.pkt_id} {'ok' if ok else 'collided'}")
        params = self._params_for(node)
        mac.advance_transaction(st.txn, mac.TxnEvent.TX_ENDED, params, self._backoff_rng[node])
        if ok:
            actions = mac.advance_transaction(
                st.txn, mac.TxnEvent.ACK_RECEIVED, params, self._backoff_rng[node]
            )
        else:
            if self.now >= self.warmup_us:
                self.collided[node] += 1
            actions = mac.advance_transaction(
                st.txn, mac.TxnEvent.ACK_MISSING, params, self._backoff_rng[node]
            )
        self._apply_actions(node, actions)

    def _on_slot_boundary(self, slot: int) -> None:
        sched = self.cfg.schedule
        slot_end = self.now + sched.slot_us
        for cell in self.cells_by_slot.get(slot, ()):
            sq = self.nodes[cell.sender].queue
            if sq:
                pkt = sq.popleft()
                self._trace("tx_start", f"cell n{cell.sender} p{pkt.pkt_id}")
                self._deliver(cell.receiver, pkt, at_us=slot_end)
        for w in self.windows_by_slot.get(slot, ()):
            for member in w.members:
                self._resume_member(member)
        nxt = self.now + sched.frame_us
        if nxt <= self.duration_us:
            self.events.push(nxt, EventKind.SLOT_BOUNDARY, (slot,))

    def _resume_member(self, node: int) -> None:
        """At a window start, restart whatever this member has pending."""
        st = self.nodes[node]
        params = self._params_for(node)
        jitter = int(self._backoff_rng[node].integers(0, self.cfg.entry_jitter_us + 1))
        if st.txn is not None:
            if st.txn.state is not mac.TxnState.BACKING_OFF:
                return  # mid-air transmission; it resolves on its own
            slots = mac.draw_backoff(params, st.txn.attempt, self._backoff_rng[node])
            self._schedule_expiry(node, jitter + slots * params.unit_backoff_us)
        else:
            self._kick(node, jitter_us=jitter)

    # -- packet fates ----------------------------------------------------

    def _deliver(self, receiver: int, pkt: Packet, at_us: "int | None" = None) -> None:
        when = self.now if at_us is None else at_us
        if receiver == COORDINATOR:
            if when >= self.warmup_us:
                self.delivered_in_window += 1
                sec = min(when // 1_000_000, len(self.series) - 1)
                self.series[sec] += 1
            if pkt.cohort:
                self.delivered[pkt.origin] += 1
            self._trace("delivered", f"p{pkt.pkt_id} o{pkt.origin}")
        else:
            self._enqueue(receiver, pkt)

    def _drop(self, pkt: Packet, why: str, where: int) -> None:
        if pkt.cohort:
            self.dropped[pkt.origin] += 1
        self._trace("drop", f"p{pkt.pkt_id} o{pkt.origin} {why} n{where}")

    # -- teardown --------------------------------------------------------

    def _finish(self) -> RunMetrics:
        in_flight = [0] * self.n
        for node, st in enumerate(self.nodes):
            for pkt in st.queue:
                if pkt.cohort:
                    in_flight[pkt.origin] += 1
            if st.current is not None and st.current.cohort:
                in_flight[st.current.origin] += 1
        for i in range(self.n):
            if self.generated[i] != self.delivered[i] + self.dropped[i] + in_flight[i]:
                raise AssertionError(
                    f"packet conservation broken at node {i}: "
                    f"{self.generated[i]} generated vs "
                    f"{self.delivered[i]}+{self.dropped[i]}+{in_flight[i]}"
                )
        return RunMetrics(
            n=self.n,
            duration_us=self.duration_us,
            warmup_us=self.warmup_us,
            generated=self.generated,
            delivered=self.delivered,
            dropped=self.dropped,
            in_flight=in_flight,
            collided=self.collided,
            delivered_series=self.series,
            delivered_in_window=self.delivered_in_window,
            trace_hash=self._hasher.hexdigest() if self._hasher else None,
        )


def run(config: RunConfig) -> RunMetrics:
    """Execute one run to completion and return its counters."""
    return _Sim(config).run()
