"""Wire one scenario into an engine, medium, and node set, and run it.

run_scenario is the single entry point used by the CLI, the sweep driver,
and the test suite; it owns stream derivation, topology construction,
traffic scheduling, and end-of-run bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass

from .engine import EventKind, Simulator, derive_stream, to_us
from .medium import Medium
from .rpl import Node, SENSOR, SINK
from .scenario import (ScenarioConfig, assign_traffic_classes,
                       generate_topology, next_send_time)
from .telemetry import EnergyLedger, MetricsReport, TraceRecorder, NULL_TRACE


@dataclass
class NodeSnapshot:
    id: int
    position: tuple[float, float]
    role: str
    traffic_class: str | None
    rank: int
    preferred_parent: int | None
    parent_advertised_rank: int | None   # rank the parent last advertised here
    path_cost: int | None
    joined: bool


@dataclass
class RunResult:
    config: ScenarioConfig
    metrics: MetricsReport
    nodes: dict[int, NodeSnapshot]
    positions: dict[int, tuple[float, float]]
    ledgers: dict[int, EnergyLedger]
    trace: TraceRecorder
    elapsed_us: int

    def depth(self, node_id: int) -> int | None:
        """Hops from node_id to the sink along preferred parents, or None."""
        hops = 0
        current = node_id
        while hops <= len(self.nodes):
            snap = self.nodes[current]
            if snap.role == SINK:
                return hops
            if snap.preferred_parent is None:
                return None
            current = snap.preferred_parent
            hops += 1
        return None

    def avg_power_mw(self) -> float:
        return sum(led.average_power_mw(self.elapsed_us)
                   for led in self.ledgers.values()) / len(self.ledgers)

    def total_energy_mj(self) -> float:
        return sum(led.total_energy_mj() for led in self.ledgers.values())


def run_scenario(cfg: ScenarioConfig,
                 positions: dict[int, tuple[float, float]] | None = None,
                 link_rx: dict[tuple[int, int], float] | None = None,
                 trace: bool = False) -> RunResult:
    """Execute one scenario to completion.

    positions and link_rx exist for programmatic studies (fixture graphs,
    heterogeneous links); JSON-driven runs leave them unset.
    """
    sim = Simulator()
    topo_stream = derive_stream(cfg.seed, "topology")
    medium_stream = derive_stream(cfg.seed, "medium")
    if positions is None:
        positions = generate_topology(cfg, topo_stream)
    node_ids = sorted(positions)

    jitter = {nid: derive_stream(cfg.seed, "protocol-jitter", nid)
              for nid in node_ids}
    traffic = {nid: derive_stream(cfg.seed, "traffic", nid)
               for nid in node_ids}
    ledgers = {nid: EnergyLedger(cfg.currents) for nid in node_ids}
    recorder = TraceRecorder(enabled=True) if trace else NULL_TRACE
    medium = Medium(sim, cfg.medium, positions, medium_stream, jitter,
                    ledgers, recorder, link_rx)
    metrics = MetricsReport()

    sensor_ids = [nid for nid in node_ids if nid != 0]
    classes = assign_traffic_classes(sensor_ids, cfg.traffic_classes)

    joined: set[int] = set()

    def on_join_change(node_id: int, is_joined: bool) -> None:
        if is_joined:
            joined.add(node_id)
            if metrics.convergence_us is None and len(joined) == len(sensor_ids):
                metrics.convergence_us = sim.now
        else:
            joined.discard(node_id)

    nodes: dict[int, Node] = {}
    for nid in node_ids:
        role = SINK if nid == 0 else SENSOR
        nodes[nid] = Node(nid, positions[nid], role, classes.get(nid),
                          cfg.objective, cfg.protocol, sim, medium,
                          ledgers[nid], jitter[nid], metrics, recorder,
                          on_join_change)
    for nid in node_ids:
        nodes[nid].start()

    warmup_us = to_us(cfg.warmup_s)
    duration_us = to_us(cfg.duration_s)

    def schedule_sends(node: Node) -> None:
        stream = traffic[node.id]

        def fire() -> None:
            node.app_generate()
            sim.schedule(next_send_time(node.traffic_class, sim.now, stream),
                         EventKind.APP_SEND, node.id, fire)

        first = next_send_time(node.traffic_class, warmup_us, stream)
        sim.schedule(first, EventKind.APP_SEND, node.id, fire)

    for nid in sensor_ids:
        if nodes[nid].traffic_class is not None:
            schedule_sends(nodes[nid])

    sim.run_until(duration_us)

    for ledger in ledgers.values():
        ledger.finalize(duration_us)

    snapshots = {}
    for nid, node in nodes.items():
        parent = node.preferred_parent
        advertised = (node.candidates[parent].rank
                      if parent is not None and parent in node.candidates
                      else None)
        snapshots[nid] = NodeSnapshot(
            id=nid, position=positions[nid], role=node.role,
            traffic_class=node.traffic_class,
            rank=node.rank, preferred_parent=parent,
            parent_advertised_rank=advertised,
            path_cost=node.path_cost, joined=node.joined)
    return RunResult(cfg, metrics, snapshots, positions, ledgers,
                     recorder, duration_us)
