"""Shared reactive-routing machinery.

Provides the control-message fabric (flood + unicast with
origination-vs-transmission accounting), discovery handles with a reply-wait
window and min-hop commit, beacon-driven neighbor loss detection, and the
priority-ordered re-establishment batches used by the multi-connection
protocol.
"""

from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from ..connections import Connection, ConnectionManager, ConnState

RREQ = "rreq"
RREP = "rrep"
ROUTE_FAILURE = "route_failure"
HELLO = "hello"


@dataclass(slots=True)
class ControlMessage:
    variant: str
    rreq_id: int
    origin: int                      # discovery source
    target: int                      # discovery destination
    hop_count: int                   # hops traversed so far
    dest_seq_no: int = 0
    accumulated_route: tuple = ()
    connection_id: Optional[int] = None
    payload: tuple = ()              # variant extras (broken link, start index)


@dataclass
class Discovery:
    key: tuple
    origin: int
    target: int
    conn_id: Optional[int]
    attempts_left: int
    commit_first: bool
    on_result: Callable[[Optional[tuple]], None]
    kind: str = "initial"            # initial | rediscovery | repair
    batch: Optional[int] = None
    rreq_id: int = 0
    candidates: list = field(default_factory=list)   # (hops, arrival order, route)
    closed: bool = False
    # extra completion callbacks: other connections to the same destination
    # piggybacking on this discovery
    followers: list = field(default_factory=list)


class ReactiveProtocol:
    """Base class for the three route-on-demand protocols.

    Subclasses implement the RREQ/RREP/data-plane specifics; everything here
    is shared wiring over the engine, world, ledger, and connection manager.
    """

    name = "base"

    def __init__(self, sim):
        self.sim = sim
        self.engine = sim.engine
        self.world = sim.world
        self.metrics = sim.metrics
        self.conn_mgr: ConnectionManager = sim.conn_mgr
        self.cfg = sim.cfg
        self.seq_no: dict[int, int] = defaultdict(int)
        self.rreq_counter: dict[int, int] = defaultdict(int)
        self.seen: dict[int, set] = defaultdict(set)
        self.best_at_target: dict[tuple, int] = {}
        self.pending: dict[tuple, Discovery] = {}
        # node -> {neighbor: consecutive missed beacons}
        self.neighbor_watch: dict[int, dict[int, int]] = defaultdict(dict)
        self.last_failure_notice: dict[tuple, float] = {}
        # connections with a recovery (repair or rediscovery) in flight
        self.recovering: set[int] = set()
        self._arrivals = 0
        self._batches = 0

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> None:
        if self.cfg.hello_interval > 0 and len(self.world.node_ids()) > 1:
            self.engine.schedule_in(self.cfg.hello_interval, self._beacon_tick)

    def open_connection(self, conn: Connection, on_result: Callable[[bool], None]) -> None:
        if not self._source_admissible(conn):
            self.conn_mgr.teardown(conn.id, "rejected")
            on_result(False)
            return
        conn.state = ConnState.DISCOVERING

        def done(route):
            if route is None or not self._commit_conn(conn, route):
                self.conn_mgr.teardown(conn.id, "unreachable")
                on_result(False)
            else:
                on_result(True)

        existing = self.pending.get(self.discovery_key(conn.src, conn.dest, conn))
        if existing is not None:
            existing.followers.append(done)
            return
        self.start_discovery(conn.src, conn.dest, conn,
                             attempts=self.cfg.max_discovery_attempts,
                             commit_first=False, on_result=done, kind="initial")

    # -- beacon / link-loss detection ----------------------------------------

    def _beacon_tick(self) -> None:
        ids, reach = self.world.reach_matrix()
        col = {nid: i for i, nid in enumerate(ids)}
        for a in ids:
            self.metrics.count_control(HELLO, origination=True)
        lost_links: list[tuple[int, int]] = []
        for a in ids:
            watch = self.neighbor_watch[a]
            ia = col[a]
            for j, heard in enumerate(reach[:, ia]):
                b = ids[j]
                if b == a:
                    continue
                if heard:
                    watch[b] = 0
                elif b in watch:
                    watch[b] += 1
                    if watch[b] >= self.cfg.allowed_misses:
                        del watch[b]
                        lost_links.append((a, b))
        for a, b in lost_links:
            self.on_link_break(a, b)
        self.engine.schedule_in(self.cfg.hello_interval, self._beacon_tick)

    def process_hello_timers(self, node: int) -> list[int]:
        """Single-node variant of the beacon pass; returns neighbors declared
        lost. Used by unit tests that drive one node directly."""
        watch = self.neighbor_watch[node]
        heard = {b for b in self.world.node_ids()
                 if b != node and self.world.can_transmit(b, node)}
        lost = []
        for b in heard:
            watch[b] = 0
        for b in sorted(set(watch) - heard):
            watch[b] += 1
            if watch[b] >= self.cfg.allowed_misses:
                del watch[b]
                lost.append(b)
        for b in lost:
            self.on_link_break(node, b)
        return lost

    # -- message fabric -------------------------------------------------------

    def _broadcast(self, node: int, msg: ControlMessage, origination: bool) -> None:
        # receivers resolve at transmission time; one event delivers to all
        # of them, in node order, at the same simulated instant
        self.metrics.count_control(msg.variant, origination)
        receivers = sorted(self.world.neighbors(node))
        if not receivers:
            return
        def deliver_all():
            for b in receivers:
                self._receive(b, msg, node)
        self.engine.schedule_in(self.cfg.control_latency, deliver_all)

    def _unicast(self, from_node: int, to_node: int, msg: ControlMessage,
                 origination: bool) -> bool:
        self.metrics.count_control(msg.variant, origination)
        if not self.world.can_transmit(from_node, to_node):
            return False
        self.engine.schedule_in(
            self.cfg.control_latency,
            lambda: self._receive(to_node, msg, from_node))
        return True

    def _receive(self, node: int, msg: ControlMessage, from_node: int) -> None:
        if msg.variant == RREQ:
            self._on_rreq(node, msg, from_node)
        elif msg.variant == RREP:
            self._on_rrep(node, msg, from_node)
        elif msg.variant == ROUTE_FAILURE:
            self._on_route_failure(node, msg, from_node)

    # -- discovery handles ----------------------------------------------------

    def discovery_key(self, origin: int, target: int, conn: Optional[Connection]) -> tuple:
        # Baselines share one discovery per (src, dest) pair; the
        # multi-connection protocol scopes per connection (overridden there).
        return (origin, target)

    def start_discovery(self, origin: int, target: int, conn: Optional[Connection],
                        attempts: int, commit_first: bool,
                        on_result: Callable[[Optional[tuple]], None],
                        kind: str = "initial", batch: Optional[int] = None) -> Discovery:
        if origin == target:
            raise ValueError("discovery requires distinct endpoints")
        key = self.discovery_key(origin, target, conn)
        if key in self.pending:
            raise RuntimeError(f"discovery already pending for {key}")
        disc = Discovery(key, origin, target, conn.id if conn else None,
                         attempts, commit_first, on_result, kind, batch)
        self.pending[key] = disc
        self.metrics.log("discovery_start", disc.conn_id, origin, target, kind,
                         batch, self._priority_of(conn))
        self._flood(disc)
        return disc

    def _priority_of(self, conn: Optional[Connection]) -> str:
        return conn.priority.name if conn is not None else ""

    def _flood(self, disc: Discovery) -> None:
        self.rreq_counter[disc.origin] += 1
        self.seq_no[disc.origin] += 1
        disc.rreq_id = self.rreq_counter[disc.origin]
        msg = ControlMessage(RREQ, disc.rreq_id, disc.origin, disc.target, 0,
                             self.seq_no[disc.origin], (disc.origin,), disc.conn_id)
        # Every flood issued by a node acting as discovery source is one
        # connection request, repairs included.
        self.metrics.count_request()
        self.seen[disc.origin].add((disc.origin, disc.rreq_id))
        self._broadcast(disc.origin, msg, origination=True)
        rid = disc.rreq_id
        self.engine.schedule_in(self.cfg.reply_window,
                                lambda: self._window_closed(disc, rid))

    def _window_closed(self, disc: Discovery, rid: int) -> None:
        if disc.closed or disc.rreq_id != rid:
            return
        if disc.candidates:
            self._commit_best(disc)
        elif disc.attempts_left > 1:
            disc.attempts_left -= 1
            self._flood(disc)
        else:
            self._finish(disc, None)

    def offer_candidate(self, node: int, route: tuple,
                        conn_id: Optional[int]) -> None:
        disc = self._pending_for(node, route[-1], conn_id)
        if disc is None or disc.closed:
            return
        self._arrivals += 1
        disc.candidates.append((len(route) - 1, self._arrivals, route))
        if disc.commit_first:
            self._commit_best(disc)

    def _pending_for(self, origin: int, target: int,
                     conn_id: Optional[int]) -> Optional[Discovery]:
        conn = self.conn_mgr.connections.get(conn_id) if conn_id is not None else None
        return self.pending.get(self.discovery_key(origin, target, conn))

    def _commit_best(self, disc: Discovery) -> None:
        hops, _, route = min(disc.candidates)
        self._finish(disc, route)

    def _finish(self, disc: Discovery, route: Optional[tuple]) -> None:
        disc.closed = True
        self.pending.pop(disc.key, None)
        self.metrics.log("discovery_end", disc.conn_id, disc.origin, disc.target,
                         disc.kind, disc.batch, route is not None)
        disc.on_result(route)
        for follower in disc.followers:
            follower(route)

    # -- re-establishment batches ----------------------------------------------

    def launch_batch(self, node: int, conns: list[Connection], mode: str) -> int:
        """Re-establish the given connections at `node`, real-time first.

        serial: each discovery starts only after the previous one finished;
        parallel: all start in this event.
        """
        self._batches += 1
        batch = self._batches
        ordered = ConnectionManager.reestablish_order(conns)
        self.metrics.log("batch", batch, node, mode, tuple(c.id for c in ordered))
        if mode == "parallel":
            for c in ordered:
                self._reestablish_one(c, node, batch, after=None)
        else:
            def run(i: int) -> None:
                if i < len(ordered):
                    self._reestablish_one(ordered[i], node, batch,
                                          after=lambda: run(i + 1))
            run(0)
        return batch

    def _reestablish_one(self, conn: Connection, node: int, batch: int,
                         after: Optional[Callable[[], None]]) -> None:
        if not conn.live or conn.id in self.recovering:
            if after is not None:
                after()
            return
        done_chain = (lambda ok: after()) if after is not None else (lambda ok: None)
        if conn.src == node:
            self._source_rediscover(conn, batch=batch, then=done_chain)
        else:
            self._local_recover(conn, node, batch=batch, then=done_chain)

    # -- hooks for subclasses ---------------------------------------------------

    def _source_admissible(self, conn: Connection) -> bool:
        return True

    def _rreq_admissible(self, node: int, msg: ControlMessage) -> bool:
        return True

    def _commit_conn(self, conn: Connection, route: tuple) -> bool:
        raise NotImplementedError

    def _source_rediscover(self, conn: Connection, batch=None, then=None) -> None:
        raise NotImplementedError

    def _local_recover(self, conn: Connection, node: int, batch=None, then=None) -> None:
        # Baselines recover from the source only.
        raise NotImplementedError

    def _on_rreq(self, node: int, msg: ControlMessage, from_node: int) -> None:
        raise NotImplementedError

    def _on_rrep(self, node: int, msg: ControlMessage, from_node: int) -> None:
        raise NotImplementedError

    def _on_route_failure(self, node: int, msg: ControlMessage, from_node: int) -> None:
        raise NotImplementedError

    # -- data plane interface (used by traffic) ---------------------------------

    def next_hop(self, node: int, packet) -> Optional[int]:
        raise NotImplementedError

    def on_no_route(self, node: int, packet) -> None:
        pass

    def on_forward_failure(self, node: int, packet, next_hop: int) -> None:
        raise NotImplementedError

    def on_link_break(self, node: int, lost_neighbor: int) -> None:
        raise NotImplementedError

    # -- failure-notice rate limiting -------------------------------------------

    def _notice_allowed(self, node: int, conn_id: int) -> bool:
        key = (node, conn_id)
        now = self.engine.now()
        last = self.last_failure_notice.get(key)
        if last is not None and now - last < 1.0:
            return False
        self.last_failure_notice[key] = now
        return True
