"""Wires one scenario + seed into a runnable simulation: populated world,
connection layout, protocol instance, traffic, and the metrics ledger."""

from .connections import Connection, ConnectionManager, ConnState, Priority
from .engine import Engine
from .metrics import MetricsLedger
from .routing.aodv import AodvProtocol
from .routing.dsr import DsrProtocol
from .routing.multiconn import MultiConnProtocol
from .scenario import Scenario
from .traffic import TrafficManager
from .world import World

PROTOCOL_CLASSES = {
    "aodv": AodvProtocol,
    "dsr": DsrProtocol,
    "new": MultiConnProtocol,
}


class Simulation:
    """One scenario + seed, ready to run.

    `nodes` and `connections` bypass the random layout for scripted
    topologies: nodes as (id, x, y, range[, direction, speed]) tuples,
    connections as ready Connection objects.
    """

    def __init__(self, scenario: Scenario, seed: int, protocol: str | None = None,
                 nodes: list | None = None,
                 connections: list[Connection] | None = None):
        scenario.validate()
        self.cfg = scenario
        self.seed = seed
        self.protocol_name = protocol or scenario.protocol
        if self.protocol_name not in PROTOCOL_CLASSES:
            raise ValueError(f"unknown protocol {self.protocol_name!r}")

        self.engine = Engine(seed)
        self.metrics = MetricsLedger()
        self.world = World(scenario.arena_width, scenario.arena_height,
                           self.engine, scenario.epoch_seconds,
                           tuple(scenario.speed_range), scenario.mobility_model)
        if nodes is not None:
            for nid, x, y, rng, *rest in nodes:
                direction = rest[0] if rest else 0.0
                speed = rest[1] if len(rest) > 1 else 0.0
                self.world.add_node(nid, x, y, rng, direction, speed)
        else:
            ranges = {int(k): float(v) for k, v in scenario.range_overrides.items()}
            range_spec = ranges if ranges else scenario.transmission_range
            self.world.populate(scenario.node_count, range_spec,
                                self.engine.stream("placement"),
                                lambda nid: self.engine.stream(f"mobility/{nid}"))

        capacities = {n: scenario.node_capacity_kbps for n in self.world.node_ids()}
        self.conn_mgr = ConnectionManager(
            capacities, enforce_bandwidth=(self.protocol_name == "new"),
            metrics=self.metrics)
        self.protocol = PROTOCOL_CLASSES[self.protocol_name](self)
        self.traffic = TrafficManager(self)

        if connections is not None:
            for conn in connections:
                if conn.stop_at is None:
                    conn.stop_at = scenario.sim_duration - scenario.traffic_stop_margin
                self.conn_mgr.register(conn)
        elif nodes is None:
            self._build_connections()
        if scenario.debug_checks:
            self.engine.debug_hooks.append(self.conn_mgr.verify_capacity)

    # -- layout -------------------------------------------------------------

    def _build_connections(self) -> None:
        cfg = self.cfg
        topo = self.engine.stream("topology")
        traffic_rng = self.engine.stream("traffic")
        nodes = self.world.node_ids()
        n_sources = min(topo.randint(*map(int, cfg.source_count)), len(nodes))
        sources = sorted(topo.sample(list(nodes), n_sources))
        cid = 0
        for src in sources:
            k = topo.randint(*map(int, cfg.connections_per_source))
            for _ in range(k):
                dest = src
                while dest == src:
                    dest = nodes[topo.randint(0, len(nodes) - 1)]
                cid += 1
                priority = (Priority.REALTIME
                            if topo.uniform(0.0, 1.0) < cfg.realtime_fraction
                            else Priority.BULK)
                demand = float(cfg.demand_kbps)
                conn = Connection(
                    id=cid, src=src, dest=dest, priority=priority,
                    demanded_bw=demand, min_bw=demand * cfg.min_bw_fraction,
                    kind=cfg.flow_kind, packet_size_bits=cfg.packet_size_bits,
                    start_at=traffic_rng.uniform(*cfg.start_window),
                    stop_at=cfg.sim_duration - cfg.traffic_stop_margin)
                self.conn_mgr.register(conn)

    # -- protocol callbacks -----------------------------------------------------

    def notify_conn_active(self, conn: Connection) -> None:
        self.traffic.on_conn_active(conn)

    # -- run ---------------------------------------------------------------------

    def run(self) -> MetricsLedger:
        cfg = self.cfg
        self.protocol.start()
        if cfg.speed_range[1] > 0:
            for nid in self.world.node_ids():
                self._schedule_epoch(nid)
        for cid in sorted(self.conn_mgr.connections):
            conn = self.conn_mgr.connections[cid]
            self.engine.schedule_at(conn.start_at,
                                    lambda conn=conn: self._start_connection(conn))
        self.engine.run_until(cfg.sim_duration)
        self.metrics.run_duration = cfg.sim_duration
        return self.metrics

    def _schedule_epoch(self, nid: int) -> None:
        stream = self.engine.stream(f"mobility/{nid}")

        def fire():
            self.world.advance_epoch(nid, stream)
            self.engine.schedule_in(self.cfg.epoch_seconds, fire)

        self.engine.schedule_at(self.world.mobility_state(nid).epoch_ends_at, fire)

    def _start_connection(self, conn: Connection) -> None:
        if conn.state is not ConnState.DISCOVERING:
            return
        self.protocol.open_connection(
            conn, lambda ok: self.notify_conn_active(conn) if ok else None)
