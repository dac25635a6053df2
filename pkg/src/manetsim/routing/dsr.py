"""Simplified source routing with per-node route caches.

Packets carry their full route. Nodes cache every route they see (request
prefixes, replies they forward) under an LRU bound, and a node holding a
cached path to the request target answers instead of re-flooding. Broken
links are reported back along the packet's route, purging caches on the way;
the source then falls back to its next cached route before re-flooding.
"""

from typing import Optional

from ..connections import Connection, ConnState
from .base import (ControlMessage, ReactiveProtocol,
                   ROUTE_FAILURE, RREP, RREQ)


class RouteCache:
    """LRU list of full source routes (most recently used at the end)."""

    __slots__ = ("capacity", "routes")

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.routes: list[tuple] = []

    def add(self, route: tuple) -> None:
        if len(route) < 2 or len(route) != len(set(route)):
            return
        if route in self.routes:
            self.routes.remove(route)
        self.routes.append(route)
        if len(self.routes) > self.capacity:
            del self.routes[0]

    def lookup(self, node: int, target: int) -> Optional[tuple]:
        """Shortest cached subpath node->target; recency breaks ties."""
        best = None
        for route in reversed(self.routes):
            try:
                i, j = route.index(node), route.index(target)
            except ValueError:
                continue
            if i < j:
                sub = route[i:j + 1]
                if best is None or len(sub) < len(best):
                    best = sub
        if best is not None:
            self.add(best)
        return best

    def purge_link(self, a: int, b: int) -> None:
        self.routes = [
            r for r in self.routes
            if (a, b) not in zip(r, r[1:])
        ]


class DsrProtocol(ReactiveProtocol):
    name = "dsr"

    def __init__(self, sim):
        super().__init__(sim)
        self.cache: dict[int, RouteCache] = {
            n: RouteCache(self.cfg.dsr_cache_capacity) for n in self.world.node_ids()}

    # -- connection handling -----------------------------------------------------

    def open_connection(self, conn: Connection, on_result) -> None:
        conn.state = ConnState.DISCOVERING
        cached = self.cache[conn.src].lookup(conn.src, conn.dest)
        if cached is not None:
            # served from cache: no flood, so no connection request counted
            self.metrics.log("cache_hit", conn.id, conn.src, conn.dest)
            self._commit_conn(conn, cached)
            on_result(True)
            return
        super().open_connection(conn, on_result)

    def _commit_conn(self, conn: Connection, route: tuple) -> bool:
        return self.conn_mgr.commit_route(conn, route)

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
                             commit_first=False, on_result=done,
                             kind="rediscovery", batch=batch)

    def _switch_or_rediscover(self, conn: Connection) -> None:
        if not conn.live or conn.id in self.recovering:
            return
        cached = self.cache[conn.src].lookup(conn.src, conn.dest)
        if cached is not None:
            # silent switch to the next cached route; staleness shows up on use
            self.metrics.log("cache_switch", conn.id, conn.src, conn.dest)
            self._commit_conn(conn, cached)
            self.sim.notify_conn_active(conn)
        else:
            self._source_rediscover(conn)

    # -- control plane ----------------------------------------------------------------

    def _on_rreq(self, node: int, msg: ControlMessage, from_node: int) -> None:
        if node in msg.accumulated_route:
            return
        key = (msg.origin, msg.rreq_id)
        route_here = msg.accumulated_route + (node,)
        # request prefixes teach routes back toward the origin
        self.cache[node].add(tuple(reversed(route_here)))
        if key in self.seen[node]:
            if node == msg.target and len(route_here) - 1 < self.best_at_target.get(key, 10 ** 9):
                self.best_at_target[key] = len(route_here) - 1
                self._send_rrep(node, route_here, msg, len(route_here) - 1)
            return
        self.seen[node].add(key)
        if node == msg.target:
            self.best_at_target[key] = len(route_here) - 1
            self._send_rrep(node, route_here, msg, len(route_here) - 1)
            return
        cached = self.cache[node].lookup(node, msg.target)
        if cached is not None:
            combined = msg.accumulated_route + cached
            if len(combined) == len(set(combined)):
                # answer from cache and stop the flood here
                self._send_rrep(node, combined, msg, len(route_here) - 1)
                return
        if len(route_here) - 1 >= self.cfg.ttl:
            return
        fwd = ControlMessage(RREQ, msg.rreq_id, msg.origin, msg.target,
                             msg.hop_count + 1, msg.dest_seq_no, route_here,
                             msg.connection_id)
        self._broadcast(node, fwd, origination=False)

    def _send_rrep(self, node: int, route: tuple, rreq: ControlMessage,
                   replier_idx: int) -> None:
        msg = ControlMessage(RREP, rreq.rreq_id, rreq.origin, route[-1], 0,
                             0, route, rreq.connection_id,
                             payload=(replier_idx,))
        self._unicast(node, route[replier_idx - 1], msg, origination=True)

    def _on_rrep(self, node: int, msg: ControlMessage, from_node: int) -> None:
        route = msg.accumulated_route
        self.cache[node].add(route)
        idx = msg.payload[0] - (msg.hop_count + 1)
        if idx == 0:
            self.offer_candidate(node, route, msg.connection_id)
            return
        fwd = ControlMessage(RREP, msg.rreq_id, msg.origin, msg.target,
                             msg.hop_count + 1, 0, route, msg.connection_id,
                             payload=msg.payload)
        self._unicast(node, route[idx - 1], fwd, origination=False)

    def _on_route_failure(self, node: int, msg: ControlMessage, from_node: int) -> None:
        a, b = msg.payload[0]
        self.cache[node].purge_link(a, b)
        route = msg.accumulated_route
        idx = route.index(node)
        if idx > 0:
            fwd = ControlMessage(ROUTE_FAILURE, 0, msg.origin, msg.target,
                                 msg.hop_count + 1, accumulated_route=route,
                                 connection_id=msg.connection_id,
                                 payload=msg.payload)
            self._unicast(node, route[idx - 1], fwd, origination=False)
            return
        conn = self.conn_mgr.connections.get(msg.connection_id)
        if conn is not None and conn.live and (a, b) in zip(conn.route, conn.route[1:]):
            self.conn_mgr.mark_repairing(conn)
            self._switch_or_rediscover(conn)

    def _send_break_notice(self, node: int, packet, broken: tuple) -> None:
        route = packet.source_route
        idx = route.index(node)
        conn = self.conn_mgr.connections.get(packet.conn_id)
        if idx == 0:
            if conn is not None and conn.live:
                self.conn_mgr.mark_repairing(conn)
                self._switch_or_rediscover(conn)
            return
        if not self._notice_allowed(node, packet.conn_id):
            return
        msg = ControlMessage(ROUTE_FAILURE, 0, node, route[0], 0,
                             accumulated_route=route[:idx + 1],
                             connection_id=packet.conn_id, payload=(broken,))
        self._unicast(node, route[idx - 1], msg, origination=True)

    # -- data plane -----------------------------------------------------------------------

    def next_hop(self, node: int, packet) -> Optional[int]:
        route = packet.source_route
        if route is None or packet.hops + 1 >= len(route) or route[packet.hops] != node:
            return None
        return route[packet.hops + 1]

    def on_no_route(self, node: int, packet) -> None:
        pass

    def on_forward_failure(self, node: int, packet, next_hop: int) -> None:
        self.cache[node].purge_link(node, next_hop)
        self._send_break_notice(node, packet, (node, next_hop))

    def on_link_break(self, node: int, lost_neighbor: int) -> None:
        self.cache[node].purge_link(node, lost_neighbor)
        for cid in sorted(self.conn_mgr.connections):
            conn = self.conn_mgr.connections[cid]
            if (conn.live and conn.src == node
                    and (node, lost_neighbor) in zip(conn.route, conn.route[1:])):
                self.conn_mgr.mark_repairing(conn)
                self._switch_or_rediscover(conn)
