"""Unit-disk radio medium with probabilistic reception and a simple CSMA MAC.

Connectivity is binary: nodes within tx_range hear each other (closed
boundary), nobody else does.  Inside the disk every frame reaches each
in-range receiver independently with rx_success_ratio, except that frames
overlapping in time at a receiver destroy each other there (no capture),
and a node never hears anything while it is itself transmitting.

Unicast frames are acknowledged and retried up to max_transmissions times;
every attempt performs a uniform random backoff and senses the channel
before transmitting.  ACKs are sent after a fixed turnaround without
carrier sensing and are subject to the same loss model as data.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from .engine import Event, EventKind, RandomStream, Simulator, US_PER_S, to_us
from .telemetry import CPU, RX, TX, EnergyLedger, TraceRecorder, NULL_TRACE


class FrameKind(Enum):
    DIO = "dio"
    DIS = "dis"
    DATA = "data"
    ACK = "ack"


class Outcome(Enum):
    DELIVERED = "delivered"
    LOST_RANDOM = "lost-random"
    LOST_COLLISION = "lost-collision"


@dataclass
class MediumConfig:
    tx_range_m: float = 100.0
    rx_success_ratio: float = 1.0
    bitrate_bps: int = 250_000
    max_transmissions: int = 4      # 1 attempt + 3 retries
    ack_timeout_s: float = 0.002
    ack_turnaround_s: float = 0.000192
    backoff_window_s: float = 0.125
    control_frame_bytes: int = 64
    data_payload_bytes: int = 30
    data_header_bytes: int = 20
    ack_frame_bytes: int = 11

    def __post_init__(self):
        if not 0.0 <= self.rx_success_ratio <= 1.0:
            raise ValueError("rx_success_ratio must be within [0, 1]")
        if self.tx_range_m <= 0:
            raise ValueError("tx_range_m must be positive")
        if self.max_transmissions < 1:
            raise ValueError("max_transmissions must be >= 1")
        if self.bitrate_bps <= 0:
            raise ValueError("bitrate_bps must be positive")
        if self.backoff_window_s <= 0:
            raise ValueError("backoff_window_s must be positive")
        min_timeout = self.ack_turnaround_s + \
            self.airtime_us(self.ack_frame_bytes) / US_PER_S
        if self.ack_timeout_s <= min_timeout:
            raise ValueError("ack_timeout_s must exceed turnaround + ACK airtime")

    def airtime_us(self, nbytes: int) -> int:
        return round(nbytes * 8 * US_PER_S / self.bitrate_bps)

    @property
    def data_frame_bytes(self) -> int:
        return self.data_payload_bytes + self.data_header_bytes


def in_range(a: tuple[float, float], b: tuple[float, float],
             cfg: MediumConfig) -> bool:
    """Closed-boundary unit-disk test: distance == tx_range counts as in range."""
    return math.dist(a, b) <= cfg.tx_range_m


@dataclass
class Frame:
    kind: FrameKind
    src: int
    dst: int | None          # None for broadcast
    size_bytes: int
    payload: object = None
    frame_id: int = 0


@dataclass
class Transmission:
    sender: int
    frame: Frame
    start: int
    end: int
    victims: tuple[int, ...]             # receivers whose outcome matters
    corrupted: set[int] = field(default_factory=set)


@dataclass
class _BroadcastJob:
    frame: Frame
    on_done: Callable[[dict[int, Outcome]], None] | None = None


@dataclass
class _UnicastJob:
    frame: Frame
    dst: int
    on_complete: Callable[[bool, int, bool], None]
    attempts: int = 0
    data_delivered: bool = False     # ground truth, for packet accounting
    waiting: bool = False
    timeout_event: Event | None = None


class _Radio:
    """Per-node MAC state: one frame in service, FIFO of pending jobs."""

    __slots__ = ("node_id", "queue", "current", "last_frame_from")

    def __init__(self, node_id: int):
        self.node_id = node_id
        self.queue: deque = deque()
        self.current: _BroadcastJob | _UnicastJob | None = None
        self.last_frame_from: dict[int, int] = {}


class Medium:
    """Shared radio channel for one simulation run."""

    def __init__(self, sim: Simulator, cfg: MediumConfig,
                 positions: dict[int, tuple[float, float]],
                 stream: RandomStream,
                 jitter_streams: dict[int, RandomStream],
                 ledgers: dict[int, EnergyLedger],
                 trace: TraceRecorder = NULL_TRACE,
                 link_rx: dict[tuple[int, int], float] | None = None):
        self.sim = sim
        self.cfg = cfg
        self.positions = positions
        self._stream = stream
        self._jitter = jitter_streams
        self._ledgers = ledgers
        self.trace = trace
        self._link_rx = {}
        if link_rx:
            for (a, b), ratio in link_rx.items():
                self._link_rx[(min(a, b), max(a, b))] = ratio

        ids = sorted(positions)
        self.neighbors: dict[int, tuple[int, ...]] = {}
        self._neighbor_sets: dict[int, frozenset[int]] = {}
        for nid in ids:
            near = tuple(m for m in ids
                         if m != nid and in_range(positions[nid], positions[m], cfg))
            self.neighbors[nid] = near
            self._neighbor_sets[nid] = frozenset(near)

        self._radios = {nid: _Radio(nid) for nid in ids}
        self._receivers: dict[int, Callable[[Frame, int], None]] = {}
        self._active: dict[int, Transmission] = {}
        self._transmitting: set[int] = set()
        self._next_frame_id = 0
        self._backoff_window_us = max(1, to_us(cfg.backoff_window_s))
        self._ack_turnaround_us = to_us(cfg.ack_turnaround_s)
        self._ack_timeout_us = to_us(cfg.ack_timeout_s)

    # ------------------------------------------------------------------ API

    def set_receiver(self, node_id: int,
                     callback: Callable[[Frame, int], None]) -> None:
        self._receivers[node_id] = callback

    def rx_ratio(self, a: int, b: int) -> float:
        return self._link_rx.get((min(a, b), max(a, b)), self.cfg.rx_success_ratio)

    def broadcast(self, sender: int, kind: FrameKind, payload: object = None,
                  on_done: Callable[[dict[int, Outcome]], None] | None = None) -> None:
        """Queue a single-attempt, unacknowledged frame to every in-range node."""
        frame = self._new_frame(kind, sender, None, self.cfg.control_frame_bytes,
                                payload)
        self._submit(sender, _BroadcastJob(frame, on_done))

    def unicast_with_ack(self, sender: int, receiver: int, payload: object,
                         on_complete: Callable[[bool, int, bool], None]) -> None:
        """Queue an acknowledged data frame with bounded retransmissions.

        on_complete(success, attempts_used, data_ever_delivered) fires once;
        the third argument is the medium's ground truth of whether any data
        attempt reached the receiver (it may be True on ACK-only losses).
        """
        frame = self._new_frame(FrameKind.DATA, sender, receiver,
                                self.cfg.data_frame_bytes, payload)
        self._submit(sender, _UnicastJob(frame, receiver, on_complete))

    def deliver(self, tx: Transmission, receiver: int,
                stream: RandomStream) -> Outcome:
        """Reception outcome for one receiver of one frame."""
        if receiver in tx.corrupted:
            return Outcome.LOST_COLLISION
        if stream.random() < self.rx_ratio(tx.sender, receiver):
            return Outcome.DELIVERED
        return Outcome.LOST_RANDOM

    # ------------------------------------------------------------- MAC layer

    def _new_frame(self, kind, src, dst, size, payload) -> Frame:
        self._next_frame_id += 1
        return Frame(kind, src, dst, size, payload, self._next_frame_id)

    def _submit(self, sender: int, job) -> None:
        radio = self._radios[sender]
        radio.queue.append(job)
        if radio.current is None:
            self._start_next(radio)

    def _start_next(self, radio: _Radio) -> None:
        if radio.current is not None or not radio.queue:
            return
        job = radio.queue.popleft()
        radio.current = job
        if isinstance(job, _UnicastJob):
            self._begin_attempt(radio, job)
        else:
            self._begin_csma(radio, job)

    def _begin_attempt(self, radio: _Radio, job: _UnicastJob) -> None:
        job.attempts += 1
        self._begin_csma(radio, job)

    def _begin_csma(self, radio: _Radio, job) -> None:
        backoff = self._jitter[radio.node_id].randrange(self._backoff_window_us)
        self.sim.schedule_in(backoff, EventKind.TIMER_FIRE, radio.node_id,
                             lambda: self._sense(radio, job))

    def _channel_busy(self, node_id: int) -> bool:
        if node_id in self._transmitting:
            return True
        audible = self._neighbor_sets[node_id]
        return any(tx.sender in audible for tx in self._active.values())

    def _sense(self, radio: _Radio, job) -> None:
        if self._channel_busy(radio.node_id):
            self._begin_csma(radio, job)      # defer with a fresh backoff
            return
        self._transmit(radio, job, job.frame,
                       victims=self._victims_of(radio.node_id, job.frame))

    def _victims_of(self, sender: int, frame: Frame) -> tuple[int, ...]:
        if frame.dst is None:
            return self.neighbors[sender]
        if frame.dst in self._neighbor_sets[sender]:
            return (frame.dst,)
        return ()

    def _transmit(self, radio: _Radio, job, frame: Frame,
                  victims: tuple[int, ...]) -> None:
        now = self.sim.now
        airtime = self.cfg.airtime_us(frame.size_bytes)
        tx = Transmission(radio.node_id, frame, now, now + airtime, victims)
        self._register(tx)
        self.sim.schedule_in(airtime, EventKind.TX_END, radio.node_id,
                             lambda: self._tx_end(radio, job, tx))

    def _register(self, tx: Transmission) -> None:
        # mutual interference with every transmission already in flight
        for other in self._active.values():
            other_audible = self._neighbor_sets[other.sender]
            for r in tx.victims:
                if r in other_audible:
                    tx.corrupted.add(r)
            new_audible = self._neighbor_sets[tx.sender]
            for r in other.victims:
                if r in new_audible or r == tx.sender:
                    other.corrupted.add(r)
        # a node busy transmitting cannot receive
        for r in tx.victims:
            if r in self._transmitting:
                tx.corrupted.add(r)
        self._active[tx.frame.frame_id] = tx
        self._transmitting.add(tx.sender)

    def _tx_end(self, radio: _Radio, job, tx: Transmission) -> None:
        del self._active[tx.frame.frame_id]
        self._transmitting.discard(tx.sender)
        airtime = tx.end - tx.start
        ledger = self._ledgers[tx.sender]
        ledger.charge(TX, airtime)
        ledger.charge(CPU, airtime)
        if self.trace.enabled:
            self.trace.emit({"t": tx.start, "ev": "tx", "node": tx.sender,
                             "kind": tx.frame.kind.value,
                             "bytes": tx.frame.size_bytes,
                             "frame": tx.frame.frame_id})
        outcomes: dict[int, Outcome] = {}
        for r in tx.victims:
            outcome = self.deliver(tx, r, self._stream)
            outcomes[r] = outcome
            if outcome is Outcome.DELIVERED:
                self._deliver_to(r, tx)

        if isinstance(job, _BroadcastJob):
            if job.on_done is not None:
                job.on_done(outcomes)
            radio.current = None
            self._start_next(radio)
        elif tx.frame.kind is FrameKind.ACK:
            pass                                   # fire and forget
        else:                                      # unicast data attempt
            if outcomes.get(job.dst) is Outcome.DELIVERED:
                job.data_delivered = True
            job.waiting = True
            job.timeout_event = self.sim.schedule_in(
                self._ack_timeout_us, EventKind.TIMER_FIRE, radio.node_id,
                lambda: self._ack_timeout(radio, job))

    def _deliver_to(self, receiver: int, tx: Transmission) -> None:
        airtime = tx.end - tx.start
        ledger = self._ledgers[receiver]
        ledger.charge(RX, airtime)
        ledger.charge(CPU, airtime)
        if self.trace.enabled:
            self.trace.emit({"t": self.sim.now, "ev": "rx", "node": receiver,
                             "from": tx.sender, "bytes": tx.frame.size_bytes,
                             "frame": tx.frame.frame_id})
        self.sim.schedule_in(0, EventKind.RX_DELIVER, receiver,
                             lambda: self._receive(receiver, tx.frame, tx.sender))

    def _receive(self, node_id: int, frame: Frame, from_id: int) -> None:
        radio = self._radios[node_id]
        if frame.kind is FrameKind.ACK:
            job = radio.current
            if (isinstance(job, _UnicastJob) and job.waiting
                    and job.dst == from_id):
                job.waiting = False
                job.timeout_event.cancel()
                radio.current = None
                job.on_complete(True, job.attempts, job.data_delivered)
                self._start_next(radio)
            return
        if frame.kind is FrameKind.DATA:
            duplicate = radio.last_frame_from.get(from_id) == frame.frame_id
            radio.last_frame_from[from_id] = frame.frame_id
            self._send_ack(node_id, from_id)
            if duplicate:
                return
        callback = self._receivers.get(node_id)
        if callback is not None:
            callback(frame, from_id)

    def _send_ack(self, node_id: int, dst: int) -> None:
        ack = self._new_frame(FrameKind.ACK, node_id, dst,
                              self.cfg.ack_frame_bytes, None)

        def fire() -> None:
            if node_id in self._transmitting:
                return                     # half duplex: drop the ACK
            radio = self._radios[node_id]
            self._transmit(radio, None, ack, self._victims_of(node_id, ack))

        self.sim.schedule_in(self._ack_turnaround_us, EventKind.TIMER_FIRE,
                             node_id, fire)

    def _ack_timeout(self, radio: _Radio, job: _UnicastJob) -> None:
        job.waiting = False
        if job.attempts < self.cfg.max_transmissions:
            self._begin_attempt(radio, job)
        else:
            radio.current = None
            job.on_complete(False, job.attempts, job.data_delivered)
            self._start_next(radio)
