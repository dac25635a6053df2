"""On-demand distance-vector baseline.

Flooded route requests build reverse entries, the destination answers with a
route reply that installs forward entries on its way back, and broken links
push a failure notice to the source, which re-floods. Sequence numbers are a
per-node monotonic counter; duplicate floods are suppressed per
(origin, rreq_id), and the destination answers again only for a strictly
shorter copy.
"""

from dataclasses import dataclass
from typing import Optional

from ..connections import Connection, ConnState
from .base import (ControlMessage, ReactiveProtocol,
                   ROUTE_FAILURE, RREP, RREQ)


@dataclass(slots=True)
class RouteEntry:
    dest: int
    next_hop: int
    hop_count: int
    dest_seq_no: int
    expires_at: float


class AodvProtocol(ReactiveProtocol):
    name = "aodv"

    def __init__(self, sim):
        super().__init__(sim)
        self.table: dict[int, dict[int, RouteEntry]] = {
            n: {} for n in self.world.node_ids()}

    # -- table helpers ---------------------------------------------------------

    def _entry(self, node: int, dest: int) -> Optional[RouteEntry]:
        e = self.table[node].get(dest)
        if e is None or e.expires_at <= self.engine.now():
            return None
        return e

    def _install(self, node: int, dest: int, next_hop: int, hops: int,
                 seq: int) -> None:
        now = self.engine.now()
        e = self.table[node].get(dest)
        # keep the freshest or shortest; a refresh from the same neighbor
        # always wins
        if (e is None or e.expires_at <= now or hops < e.hop_count
                or e.next_hop == next_hop):
            self.table[node][dest] = RouteEntry(
                dest, next_hop, hops, seq, now + self.cfg.route_lifetime)

    def _invalidate_via(self, node: int, lost: int) -> None:
        tbl = self.table[node]
        for dest in [d for d, e in tbl.items() if e.next_hop == lost]:
            del tbl[dest]

    # -- control plane ----------------------------------------------------------

    def _on_rreq(self, node: int, msg: ControlMessage, from_node: int) -> None:
        key = (msg.origin, msg.rreq_id)
        hops_here = msg.hop_count + 1
        is_target = node == msg.target
        duplicate = key in self.seen[node]
        self._install(node, msg.origin, from_node, hops_here, msg.dest_seq_no)
        if duplicate:
            # the target answers again only for a strictly better copy
            if is_target and hops_here < self.best_at_target.get(key, hops_here):
                self.best_at_target[key] = hops_here
                self._send_rrep(node, msg)
            return
        self.seen[node].add(key)
        if is_target:
            if self._rreq_admissible(node, msg):
                self.best_at_target[key] = hops_here
                self._send_rrep(node, msg)
            return
        if hops_here >= self.cfg.ttl or not self._rreq_admissible(node, msg):
            return
        fwd = ControlMessage(RREQ, msg.rreq_id, msg.origin, msg.target, hops_here,
                             msg.dest_seq_no,
                             msg.accumulated_route + (node,), msg.connection_id)
        self._broadcast(node, fwd, origination=False)

    def _send_rrep(self, node: int, rreq: ControlMessage) -> None:
        self.seq_no[node] += 1
        path = rreq.accumulated_route + (node,)
        msg = ControlMessage(RREP, rreq.rreq_id, rreq.origin, node, 0,
                             self.seq_no[node], path, rreq.connection_id)
        self._unicast(node, path[-2], msg, origination=True)

    def _on_rrep(self, node: int, msg: ControlMessage, from_node: int) -> None:
        path = msg.accumulated_route
        hops_to_target = msg.hop_count + 1
        idx = len(path) - 1 - hops_to_target
        self._install(node, msg.target, from_node, hops_to_target, msg.dest_seq_no)
        if idx == 0:
            self.offer_candidate(node, path, msg.connection_id)
            return
        fwd = ControlMessage(RREP, msg.rreq_id, msg.origin, msg.target,
                             hops_to_target, msg.dest_seq_no, path,
                             msg.connection_id)
        self._unicast(node, path[idx - 1], fwd, origination=False)

    def _on_route_failure(self, node: int, msg: ControlMessage, from_node: int) -> None:
        conn_id = msg.connection_id
        if node != msg.target:
            nxt = self._entry(node, msg.target)
            if nxt is not None:
                fwd = ControlMessage(ROUTE_FAILURE, msg.rreq_id, msg.origin,
                                     msg.target, msg.hop_count + 1,
                                     connection_id=conn_id, payload=msg.payload)
                self._unicast(node, nxt.next_hop, fwd, origination=False)
            return
        conn = self.conn_mgr.connections.get(conn_id)
        if conn is not None and conn.live:
            self._source_rediscover(conn)

    def _send_route_failure(self, node: int, conn: Connection) -> None:
        if not self._notice_allowed(node, conn.id):
            return
        nxt = self._entry(node, conn.src)
        if nxt is None:
            # no reverse path; the next failed packet will retry in a second
            return
        msg = ControlMessage(ROUTE_FAILURE, 0, node, conn.src, 0,
                             connection_id=conn.id)
        self._unicast(node, nxt.next_hop, msg, origination=True)

    # -- connection handling ------------------------------------------------------

    def _commit_conn(self, conn: Connection, route: tuple) -> bool:
        return self.conn_mgr.commit_route(conn, route)

    def _fast_recovery_commit(self) -> bool:
        # The baseline always sits out the full reply window; the
        # multi-connection variant overrides this for its recovery paths.
        return False

    def _source_rediscover(self, conn: Connection, batch=None, then=None) -> None:
        if not conn.live or conn.id in self.recovering:
            if then is not None:
                then(False)
            return
        self.recovering.add(conn.id)
        self.conn_mgr.mark_repairing(conn)

        def done(route):
            self.recovering.discard(conn.id)
            ok = route is not None and conn.live and self._commit_conn(conn, route)
            if ok:
                self.sim.notify_conn_active(conn)
            else:
                self.conn_mgr.teardown(conn.id, "unreachable")
            if then is not None:
                then(ok)

        existing = self.pending.get(self.discovery_key(conn.src, conn.dest, conn))
        if existing is not None:
            existing.followers.append(done)
            return
        self.start_discovery(conn.src, conn.dest, conn,
                             attempts=self.cfg.max_discovery_attempts,
                             commit_first=self._fast_recovery_commit(),
                             on_result=done, kind="rediscovery", batch=batch)

    def _affected_conns(self, node: int, lost: int) -> list[Connection]:
        out = []
        for cid in sorted(self.conn_mgr.connections):
            conn = self.conn_mgr.connections[cid]
            if not conn.live or len(conn.route) < 2:
                continue
            pairs = zip(conn.route, conn.route[1:])
            if (node, lost) in pairs:
                out.append(conn)
        return out

    def _handle_break_for(self, node: int, conn: Connection) -> None:
        if conn.src == node:
            self._source_rediscover(conn)
        else:
            self._send_route_failure(node, conn)

    # -- data plane ----------------------------------------------------------------

    def next_hop(self, node: int, packet) -> Optional[int]:
        e = self._entry(node, packet.dest)
        if e is None:
            return None
        now = self.engine.now()
        e.expires_at = now + self.cfg.route_lifetime
        back = self.table[node].get(packet.src)
        if back is not None:
            # keep the reverse path alive so failure notices can travel
            back.expires_at = now + self.cfg.route_lifetime
        return e.next_hop

    def on_no_route(self, node: int, packet) -> None:
        conn = self.conn_mgr.connections.get(packet.conn_id)
        if conn is None or not conn.live:
            return
        if node == conn.src:
            self._source_rediscover(conn)
        else:
            self._send_route_failure(node, conn)

    def on_forward_failure(self, node: int, packet, next_hop: int) -> None:
        self._invalidate_via(node, next_hop)
        conn = self.conn_mgr.connections.get(packet.conn_id)
        if conn is not None and conn.live:
            self._handle_break_for(node, conn)

    def on_link_break(self, node: int, lost_neighbor: int) -> None:
        affected = self._affected_conns(node, lost_neighbor)
        self._invalidate_via(node, lost_neighbor)
        for conn in affected:
            self._handle_break_for(node, conn)
