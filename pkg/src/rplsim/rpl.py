"""Per-node RPL upward-routing state machine.

Each node joins a single grounded DODAG rooted at the sink, paces its DIO
beacons with a trickle timer, keeps a candidate-parent set fed by heard
DIOs, and forwards data packets hop by hop toward its preferred parent.
Parent choice and rank are delegated to the configured objective function.

Trickle resets follow the usual inconsistency rules with one damping
refinement: a DIO that merely drifts this node's rank by less than one
hop increment (metric noise under MRHOF) is treated as consistent, so the
beacon rate is governed by structural changes, not per-sample ETX jitter.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .engine import EventKind, RandomStream, Simulator, to_us
from .medium import Frame, FrameKind, Medium
from .objective import (INFINITE_RANK, LinkStats, MAX_PATH_COST, MRHOF_ETX,
                        OF0, RANK_UNIT, ROOT_RANK, etx_update, mrhof_path_cost,
                        mrhof_rank, mrhof_select_parent, of0_rank,
                        of0_select_parent)
from .telemetry import CPU, EnergyLedger, MetricsReport, TraceRecorder, NULL_TRACE

SINK = "sink"
SENSOR = "sensor"


@dataclass
class ProtocolConfig:
    trickle_i_min_s: float = 4.096
    trickle_doublings: int = 8
    trickle_redundancy_k: int = 10
    dis_period_s: float = 5.0
    queue_capacity: int = 8
    ttl: int = 16
    parent_expiry_floor_s: float = 100.0
    parent_expiry_trickle_factor: float = 3.0
    housekeeping_period_s: float = 10.0
    cpu_process_s: float = 0.001
    etx_initial: int = 256

    def __post_init__(self):
        if self.trickle_i_min_s <= 0 or self.trickle_doublings < 0:
            raise ValueError("invalid trickle parameters")
        if self.queue_capacity < 1 or self.ttl < 1:
            raise ValueError("queue_capacity and ttl must be >= 1")


@dataclass
class DioMessage:
    sender: int
    advertised_rank: int
    dodag_version: int
    of_identifier: str
    path_cost: int | None = None


@dataclass
class TrickleState:
    i_min_us: int
    doublings: int
    redundancy_k: int
    current_interval_us: int = 0
    t_us: int = 0
    counter: int = 0

    @property
    def max_interval_us(self) -> int:
        return self.i_min_us << self.doublings


@dataclass
class CandidateInfo:
    rank: int
    cost: int | None
    last_heard: int


@dataclass
class DataPacket:
    pid: str
    traffic_class: str
    created: int
    ttl: int
    hops: int = 0


class Node:
    """One sensor or the sink; owned and mutated only by the event loop."""

    def __init__(self, node_id: int, position: tuple[float, float], role: str,
                 traffic_class: str | None, objective: str,
                 proto: ProtocolConfig, sim: Simulator, medium: Medium,
                 ledger: EnergyLedger, jitter: RandomStream,
                 metrics: MetricsReport, trace: TraceRecorder = NULL_TRACE,
                 on_join_change=None):
        self.id = node_id
        self.position = position
        self.role = role
        self.traffic_class = traffic_class
        self.objective = objective
        self.proto = proto
        self.sim = sim
        self.medium = medium
        self.ledger = ledger
        self.jitter = jitter
        self.metrics = metrics
        self.trace = trace
        self.on_join_change = on_join_change

        self.rank = ROOT_RANK if role == SINK else INFINITE_RANK
        self.path_cost: int | None = 0 if role == SINK else None
        self.preferred_parent: int | None = None
        self.candidates: dict[int, CandidateInfo] = {}
        self.link_stats: dict[int, LinkStats] = {}
        self.trickle = TrickleState(to_us(proto.trickle_i_min_s),
                                    proto.trickle_doublings,
                                    proto.trickle_redundancy_k)
        self.queue: deque[DataPacket] = deque()

        self._trickle_fire_ev = None
        self._trickle_end_ev = None
        self._dis_ev = None
        self._mac_busy = False
        self._pkt_seq = 0
        self._cpu_process_us = to_us(proto.cpu_process_s)
        self._last_advertised_rank = self.rank
        medium.set_receiver(node_id, self._on_frame)

    @property
    def joined(self) -> bool:
        if self.role == SINK:
            return True
        return self.rank < INFINITE_RANK and self.preferred_parent is not None

    def start(self) -> None:
        if self.role == SINK:
            self._trickle_reset()
        else:
            self._schedule_dis()
            stagger = self.jitter.randrange(to_us(self.proto.housekeeping_period_s))
            self.sim.schedule_in(stagger, EventKind.TIMER_FIRE, self.id,
                                 self._housekeeping)

    # ------------------------------------------------------------ reception

    def _on_frame(self, frame: Frame, from_id: int) -> None:
        if frame.kind is FrameKind.DIO:
            self.on_dio(frame.payload)
        elif frame.kind is FrameKind.DIS:
            self.on_dis(from_id)
        elif frame.kind is FrameKind.DATA:
            self.on_data(frame.payload, from_id)

    def on_dio(self, dio: DioMessage) -> None:
        if self.role == SINK:
            self.trickle.counter += 1
            return
        if dio.advertised_rank >= INFINITE_RANK:
            self.candidates.pop(dio.sender, None)
        else:
            self.candidates[dio.sender] = CandidateInfo(
                dio.advertised_rank, dio.path_cost, self.sim.now)
        old_rank, old_parent = self._evaluate()
        if self._selection_inconsistent(old_rank, old_parent):
            if self.joined:
                self._trickle_reset()
        elif self.joined:
            self.trickle.counter += 1

    def on_dis(self, from_id: int) -> None:
        if self.joined:
            self._trickle_reset()

    def on_data(self, packet: DataPacket, from_id: int) -> None:
        self.ledger.charge(CPU, self._cpu_process_us)
        packet.hops += 1
        now = self.sim.now
        if self.role == SINK:
            self.metrics.record_packet(packet.traffic_class, "delivered",
                                       hops=packet.hops,
                                       latency_us=now - packet.created)
            if self.trace.enabled:
                self.trace.emit({"t": now, "ev": "deliver", "node": self.id,
                                 "pkt": packet.pid, "hops": packet.hops,
                                 "lat": now - packet.created})
            return
        if self.trace.enabled:
            self.trace.emit({"t": now, "ev": "fwd", "node": self.id,
                             "pkt": packet.pid})
        packet.ttl -= 1
        if packet.ttl <= 0:
            self._drop(packet, "ttl")
            return
        self._enqueue(packet)

    # ----------------------------------------------------- parent selection

    def _link(self, neighbor: int) -> LinkStats:
        stats = self.link_stats.get(neighbor)
        if stats is None:
            stats = LinkStats(neighbor, etx_estimate=self.proto.etx_initial)
            self.link_stats[neighbor] = stats
        return stats

    def _selection_inconsistent(self, old_rank: int,
                                old_parent: int | None) -> bool:
        """True when a re-selection warrants a trickle reset: the parent
        switched, or the rank moved and now sits a full hop increment away
        from what this node last advertised."""
        if old_parent != self.preferred_parent:
            return True
        return (self.rank != old_rank
                and abs(self.rank - self._last_advertised_rank) >= RANK_UNIT)

    def _evaluate(self) -> tuple[int, int | None]:
        """Re-run parent selection; returns the (rank, parent) it replaced."""
        old_rank, old_parent = self.rank, self.preferred_parent
        was_joined = self.joined

        usable = {nid: c for nid, c in self.candidates.items()
                  if c.rank < self.rank}
        choice = None
        new_rank, new_cost = INFINITE_RANK, None
        if self.objective == OF0:
            ranks = {nid: c.rank for nid, c in usable.items()}
            current = old_parent if old_parent in ranks else None
            choice = of0_select_parent(ranks, current)
            if choice is not None:
                new_rank = of0_rank(usable[choice].rank)
        else:
            costs = {}
            for nid, c in usable.items():
                if c.cost is None or c.cost >= MAX_PATH_COST:
                    continue
                through = mrhof_path_cost(c.cost, self._link(nid).etx_estimate)
                if through < MAX_PATH_COST:
                    costs[nid] = through
            current = old_parent if old_parent in costs else None
            choice = mrhof_select_parent(costs, current)
            if choice is not None:
                new_cost = costs[choice]
                new_rank = mrhof_rank(usable[choice].rank, new_cost)
        if new_rank >= INFINITE_RANK:
            choice = None

        if choice is None:
            self.rank = INFINITE_RANK
            self.path_cost = None
            self.preferred_parent = None
        else:
            assert new_rank > usable[choice].rank
            self.rank = new_rank
            self.path_cost = new_cost
            self.preferred_parent = choice

        if (self.rank, self.preferred_parent) != (old_rank, old_parent):
            if self.trace.enabled:
                self.trace.emit({"t": self.sim.now, "ev": "parent",
                                 "node": self.id, "parent": self.preferred_parent,
                                 "rank": self.rank})
        if self.joined != was_joined:
            if self.joined:
                if self._dis_ev is not None:
                    self._dis_ev.cancel()
                    self._dis_ev = None
                self._trickle_reset()
            else:
                self._trickle_stop()
                self._schedule_dis()
            if self.on_join_change is not None:
                self.on_join_change(self.id, self.joined)
        return old_rank, old_parent

    def _housekeeping(self) -> None:
        now = self.sim.now
        expiry = to_us(self.proto.parent_expiry_floor_s)
        if self.joined:
            adaptive = round(self.proto.parent_expiry_trickle_factor
                             * self.trickle.current_interval_us)
            expiry = max(expiry, adaptive)
        stale = [nid for nid, c in self.candidates.items()
                 if now - c.last_heard > expiry]
        if stale:
            for nid in stale:
                del self.candidates[nid]
            old_rank, old_parent = self._evaluate()
            if self._selection_inconsistent(old_rank, old_parent) \
                    and self.joined:
                self._trickle_reset()
        self.sim.schedule_in(to_us(self.proto.housekeeping_period_s),
                             EventKind.TIMER_FIRE, self.id, self._housekeeping)

    # --------------------------------------------------------------- trickle

    def _trickle_reset(self) -> None:
        self._trickle_stop()
        self.trickle.current_interval_us = self.trickle.i_min_us
        self._trickle_start_interval()

    def _trickle_stop(self) -> None:
        if self._trickle_fire_ev is not None:
            self._trickle_fire_ev.cancel()
            self._trickle_fire_ev = None
        if self._trickle_end_ev is not None:
            self._trickle_end_ev.cancel()
            self._trickle_end_ev = None

    def _trickle_start_interval(self) -> None:
        st = self.trickle
        st.counter = 0
        half = st.current_interval_us // 2
        st.t_us = half + self.jitter.randrange(st.current_interval_us - half)
        self._trickle_fire_ev = self.sim.schedule_in(
            st.t_us, EventKind.TIMER_FIRE, self.id, self._trickle_fire)
        self._trickle_end_ev = self.sim.schedule_in(
            st.current_interval_us, EventKind.TIMER_FIRE, self.id,
            self._trickle_interval_end)

    def _trickle_fire(self) -> None:
        if self.trickle.counter < self.trickle.redundancy_k:
            self._send_dio()

    def _trickle_interval_end(self) -> None:
        st = self.trickle
        st.current_interval_us = min(st.current_interval_us * 2,
                                     st.max_interval_us)
        self._trickle_start_interval()

    def _send_dio(self) -> None:
        cost = self.path_cost if self.objective == MRHOF_ETX else None
        dio = DioMessage(self.id, self.rank, 0, self.objective, cost)
        self._last_advertised_rank = self.rank
        self.metrics.dio_count += 1
        self.medium.broadcast(self.id, FrameKind.DIO, dio)

    # ------------------------------------------------------------------ DIS

    def _schedule_dis(self) -> None:
        period = self.proto.dis_period_s * self.jitter.uniform(0.9, 1.1)
        self._dis_ev = self.sim.schedule_in(to_us(period), EventKind.TIMER_FIRE,
                                            self.id, self._dis_fire)

    def _dis_fire(self) -> None:
        self._dis_ev = None
        if self.joined:
            return
        self.metrics.dis_count += 1
        self.medium.broadcast(self.id, FrameKind.DIS)
        self._schedule_dis()

    # ------------------------------------------------------------- data path

    def app_generate(self) -> None:
        self._pkt_seq += 1
        packet = DataPacket(pid=f"{self.id}-{self._pkt_seq}",
                            traffic_class=self.traffic_class,
                            created=self.sim.now, ttl=self.proto.ttl)
        self.ledger.charge(CPU, self._cpu_process_us)
        if self.trace.enabled:
            self.trace.emit({"t": self.sim.now, "ev": "send", "node": self.id,
                             "pkt": packet.pid, "cls": packet.traffic_class})
        if self.preferred_parent is None:
            self._drop(packet, "no-route")
            return
        self._enqueue(packet)

    def _enqueue(self, packet: DataPacket) -> None:
        if len(self.queue) >= self.proto.queue_capacity:
            self._drop(packet, "queue-overflow")
            return
        self.queue.append(packet)
        self._service_queue()

    def _service_queue(self) -> None:
        while not self._mac_busy and self.queue:
            packet = self.queue.popleft()
            parent = self.preferred_parent
            if parent is None:
                self._drop(packet, "no-route")
                continue
            self._mac_busy = True
            self.medium.unicast_with_ack(
                self.id, parent, packet,
                lambda ok, attempts, truth, p=packet, q=parent:
                    self._unicast_done(p, q, ok, attempts, truth))

    def _unicast_done(self, packet: DataPacket, parent: int, success: bool,
                      attempts: int, data_delivered: bool) -> None:
        self._mac_busy = False
        etx_update(self._link(parent), attempts, success,
                   self.medium.cfg.max_transmissions, self.sim.now)
        if success and parent in self.candidates:
            self.candidates[parent].last_heard = self.sim.now
        if self.objective == MRHOF_ETX:
            old_rank, old_parent = self._evaluate()
            if self._selection_inconsistent(old_rank, old_parent) \
                    and self.joined:
                self._trickle_reset()
        if not success and not data_delivered:
            self._drop(packet, "mac-failure")
        self._service_queue()

    def _drop(self, packet: DataPacket, cause: str) -> None:
        self.metrics.record_packet(packet.traffic_class, cause)
        if self.trace.enabled:
            self.trace.emit({"t": self.sim.now, "ev": "drop", "node": self.id,
                             "pkt": packet.pid, "cause": cause})
