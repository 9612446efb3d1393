"""Unslotted CSMA/CA: backoff arithmetic and the per-packet transaction machine.

A transaction is one packet's attempt ladder: back off, clear-channel
assess, transmit, wait for the acknowledgement folded into the transaction
airtime. A busy assessment or a missing acknowledgement both count as a
failed attempt and widen the next backoff window; the packet is dropped when
attempts run out.

The machine itself is pure bookkeeping. Callers (the event engine) own the
clock, the channel, and the radio: they feed events in and execute the
returned actions.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Union

import numpy as np

from .errors import IllegalTransition, OverflowGuard


@dataclass(frozen=True)
class BackoffParams:
    c_nb: int = 5
    c_be: int = 7
    max_attempts: int = 8
    unit_backoff_us: int = 1000
    txn_duration_us: int = 4000
    window_exponent_cap: int = 8


def backoff_window(params: BackoffParams, attempt: int) -> tuple[int, int]:
    """Inclusive slot window for the given attempt number (first attempt = 1).

    The window floor is fixed at c_nb + c_be; the width doubles with each
    attempt. Raises OverflowGuard past the exponent ceiling; callers that
    keep retrying clamp the attempt before asking (see draw_backoff).
    """
    if attempt < 1:
        raise ValueError(f"attempt must be >= 1, got {attempt}")
    if attempt > params.window_exponent_cap:
        raise OverflowGuard(
            f"attempt {attempt} exceeds window exponent cap {params.window_exponent_cap}"
        )
    lo = params.c_nb + params.c_be
    hi = lo + (1 << attempt) - 1
    return lo, hi


def draw_backoff(params: BackoffParams, attempt: int, rng: np.random.Generator) -> int:
    """Uniform draw (in slots) from the attempt's window.

    Attempts past the exponent cap keep the capped window rather than
    overflowing: retries stay bounded however long the ladder runs.
    """
    lo, hi = backoff_window(params, min(attempt, params.window_exponent_cap))
    return int(rng.integers(lo, hi + 1))


def cca(active_senders: Iterable[int], sender_neighbors: frozenset) -> bool:
    """Clear-channel assessment; True means busy.

    The channel is busy exactly when some audible node (a radio neighbor of
    the assessing sender) is mid-transmission. Transmissions by hidden nodes
    are invisible here; that blindness is the point of modelling it.
    """
    return any(s in sender_neighbors for s in active_senders)


class TxnState(Enum):
    BACKING_OFF = "backing_off"
    CCA = "cca"
    TRANSMITTING = "transmitting"
    AWAITING_ACK = "awaiting_ack"
    DONE = "done"
    FAILED = "failed"


class TxnEvent(Enum):
    BACKOFF_EXPIRED = "backoff_expired"
    CCA_BUSY = "cca_busy"
    CCA_CLEAR = "cca_clear"
    TX_ENDED = "tx_ended"
    ACK_RECEIVED = "ack_received"
    ACK_MISSING = "ack_missing"


@dataclass
class CsmaTransaction:
    sender: int
    receiver: int
    packet_id: int
    attempt: int = 1
    state: TxnState = TxnState.BACKING_OFF


# Actions handed back to the engine.
@dataclass(frozen=True)
class ScheduleBackoff:
    delay_us: int


@dataclass(frozen=True)
class StartTransmission:
    duration_us: int


@dataclass(frozen=True)
class DropPacket:
    pass


@dataclass(frozen=True)
class Complete:
    pass


Action = Union[ScheduleBackoff, StartTransmission, DropPacket, Complete]


def _retry_or_drop(
    txn: CsmaTransaction, params: BackoffParams, rng: np.random.Generator
) -> list[Action]:
    txn.attempt += 1
    if txn.attempt > params.max_attempts:
        txn.state = TxnState.FAILED
        return [DropPacket()]
    txn.state = TxnState.BACKING_OFF
    slots = draw_backoff(params, txn.attempt, rng)
    return [ScheduleBackoff(delay_us=slots * params.unit_backoff_us)]


def advance_transaction(
    txn: CsmaTransaction,
    event: TxnEvent,
    params: BackoffParams,
    rng: np.random.Generator,
) -> list[Action]:
    """Apply one event to the transaction, returning actions to execute.

    Legal flow: backing_off -> cca -> (transmitting | backing_off)
    -> awaiting_ack -> (done | backing_off), with failed reachable from any
    retry once attempts exceed params.max_attempts.
    """
    if txn.state is TxnState.BACKING_OFF and event is TxnEvent.BACKOFF_EXPIRED:
        txn.state = TxnState.CCA
        return []
    if txn.state is TxnState.CCA and event is TxnEvent.CCA_CLEAR:
        txn.state = TxnState.TRANSMITTING
        return [StartTransmission(duration_us=params.txn_duration_us)]
    if txn.state is TxnState.CCA and event is TxnEvent.CCA_BUSY:
        return _retry_or_drop(txn, params, rng)
    if txn.state is TxnState.TRANSMITTING and event is TxnEvent.TX_ENDED:
        txn.state = TxnState.AWAITING_ACK
        return []
    if txn.state is TxnState.AWAITING_ACK and event is TxnEvent.ACK_RECEIVED:
        txn.state = TxnState.DONE
        return [Complete()]
    if txn.state is TxnState.AWAITING_ACK and event is TxnEvent.ACK_MISSING:
        return _retry_or_drop(txn, params, rng)
    raise IllegalTransition(f"{txn.state.value} cannot accept {event.value}")
