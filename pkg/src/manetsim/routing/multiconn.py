"""Multi-connection route maintenance on top of the distance-vector baseline.

What changes relative to plain AODV:
  * every route request carries its connection and is admission-checked at
    each hop, so nodes without spare bandwidth are excluded during discovery;
  * committed routes reserve bandwidth at every node they traverse
    (renegotiated down to the connection floor, evicting lower-priority
    grants when necessary) and forwarding state is kept per connection;
  * when a link on a live route breaks, the surviving on-path node repairs
    locally, acting as the discovery source toward the destination, and the
    data path is spliced without the source re-flooding;
  * a node with several broken connections re-establishes them as one batch,
    real-time traffic first, serially or in parallel per configuration.
"""

from typing import Optional

from ..connections import Connection, ConnState
from .aodv import AodvProtocol
from .base import ControlMessage, ROUTE_FAILURE


class MultiConnProtocol(AodvProtocol):
    name = "new"

    def __init__(self, sim):
        super().__init__(sim)
        self.conn_next: dict[int, dict[int, int]] = {
            n: {} for n in self.world.node_ids()}
        self.conn_prev: dict[int, dict[int, int]] = {
            n: {} for n in self.world.node_ids()}

    # -- admission hooks ----------------------------------------------------------

    def discovery_key(self, origin: int, target: int, conn: Optional[Connection]) -> tuple:
        return (origin, target, conn.id if conn is not None else None)

    def _source_admissible(self, conn: Connection) -> bool:
        return self.conn_mgr.can_admit(conn.src, conn)

    def _rreq_admissible(self, node: int, msg: ControlMessage) -> bool:
        if msg.connection_id is None:
            return True
        conn = self.conn_mgr.connections.get(msg.connection_id)
        if conn is None:
            return True
        return self.conn_mgr.can_admit(node, conn)

    def _fast_recovery_commit(self) -> bool:
        # live connections take the first reply when re-establishing after a
        # break; with uniform per-hop control latency the first reply rode a
        # shortest path anyway, and recovery time is what the maintenance
        # scheme is optimizing
        return True

    # -- connection commit ----------------------------------------------------------

    def _commit_conn(self, conn: Connection, route: tuple) -> bool:
        if len(route) != len(set(route)):
            return False
        old_route = conn.route
        if not self.conn_mgr.commit_route(conn, route):
            return False
        for n in old_route:
            self.conn_next[n].pop(conn.id, None)
            self.conn_prev[n].pop(conn.id, None)
        for i, n in enumerate(route[:-1]):
            self.conn_next[n][conn.id] = route[i + 1]
        for i in range(1, len(route)):
            self.conn_prev[route[i]][conn.id] = route[i - 1]
        return True

    # -- break handling ----------------------------------------------------------------

    def _local_recover(self, conn: Connection, node: int, batch=None, then=None) -> None:
        """Local repair: `node` floods toward the destination as if it were
        the source and splices the reply into the existing prefix."""
        if node == conn.dest or not conn.live or conn.id in self.recovering:
            if then is not None:
                then(False)
            return
        self.recovering.add(conn.id)
        self.conn_mgr.mark_repairing(conn)

        def done(route):
            self.recovering.discard(conn.id)
            ok = route is not None and conn.live and self._splice(conn, node, route)
            if ok:
                self.sim.notify_conn_active(conn)
            else:
                self._repair_failed(conn, node)
            if then is not None:
                then(ok)

        # recovery speed beats path optimality mid-flow: take the first reply
        self.start_discovery(node, conn.dest, conn, attempts=1,
                             commit_first=True, on_result=done,
                             kind="repair", batch=batch)

    def _splice(self, conn: Connection, node: int, tail: tuple) -> bool:
        if node not in conn.route:
            return False
        prefix = conn.route[: conn.route.index(node)]
        if set(prefix) & set(tail):
            return False  # reply looped back through the upstream prefix
        return self._commit_conn(conn, prefix + tail)

    def _repair_failed(self, conn: Connection, node: int) -> None:
        if not conn.live:
            return
        if conn.src == node:
            self.conn_mgr.teardown(conn.id, "unreachable")
            return
        sent = self._send_conn_failure(node, conn)
        if not sent:
            # cannot even tell the source; give the next data packet a chance
            return

    def _send_conn_failure(self, node: int, conn: Connection) -> bool:
        prev = self.conn_prev[node].get(conn.id)
        if prev is None:
            return False
        msg = ControlMessage(ROUTE_FAILURE, 0, node, conn.src, 0,
                             connection_id=conn.id)
        return self._unicast(node, prev, msg, origination=True)

    def _on_route_failure(self, node: int, msg: ControlMessage, from_node: int) -> None:
        conn = self.conn_mgr.connections.get(msg.connection_id)
        if conn is None:
            return
        if node != msg.target:
            prev = self.conn_prev[node].get(conn.id)
            if prev is not None:
                fwd = ControlMessage(ROUTE_FAILURE, 0, msg.origin, msg.target,
                                     msg.hop_count + 1, connection_id=conn.id)
                self._unicast(node, prev, fwd, origination=False)
            return
        if conn.live:
            self._source_rediscover(conn)

    def _handle_break_at(self, node: int, lost: int) -> None:
        affected = []
        for cid in sorted(self.conn_next[node]):
            if self.conn_next[node][cid] != lost:
                continue
            conn = self.conn_mgr.connections[cid]
            if conn.live:
                affected.append(conn)
                self.conn_next[node].pop(cid)
        downstream = []
        if self.cfg.repair_initiator == "downstream":
            for cid in sorted(self.conn_prev[node]):
                if self.conn_prev[node][cid] != lost:
                    continue
                conn = self.conn_mgr.connections[cid]
                if conn.live:
                    downstream.append(conn)
        if affected:
            # queued batch members stop carrying traffic right away
            for conn in affected:
                self.conn_mgr.mark_repairing(conn)
            if self.cfg.repair_initiator == "downstream":
                # literal mode: the upstream survivor only reports the break
                for conn in affected:
                    if conn.src == node:
                        self._source_rediscover(conn)
                    else:
                        self._send_conn_failure(node, conn)
            else:
                self.launch_batch(node, affected, self.cfg.reestablish_mode)
        if downstream:
            self.launch_batch(node, downstream, self.cfg.reestablish_mode)

    # -- data plane ----------------------------------------------------------------------

    def next_hop(self, node: int, packet) -> Optional[int]:
        return self.conn_next[node].get(packet.conn_id)

    def on_no_route(self, node: int, packet) -> None:
        conn = self.conn_mgr.connections.get(packet.conn_id)
        if conn is None or not conn.live:
            return
        key = self.discovery_key(node, conn.dest, conn)
        src_key = self.discovery_key(conn.src, conn.dest, conn)
        if key in self.pending or src_key in self.pending:
            return
        if self._notice_allowed(node, conn.id):
            if conn.src == node:
                self._source_rediscover(conn)
            else:
                self._send_conn_failure(node, conn)

    def on_forward_failure(self, node: int, packet, next_hop: int) -> None:
        self._invalidate_via(node, next_hop)
        self._handle_break_at(node, next_hop)

    def on_link_break(self, node: int, lost_neighbor: int) -> None:
        self._invalidate_via(node, lost_neighbor)
        self._handle_break_at(node, lost_neighbor)

    def reestablish_all(self, moved: int, mode: str) -> int:
        """Re-launch discovery for every live connection this node carries."""
        conns = []
        seen = set()
        for table in (self.conn_next[moved], self.conn_prev[moved]):
            for cid in table:
                if cid in seen:
                    continue
                seen.add(cid)
                conn = self.conn_mgr.connections[cid]
                if conn.live:
                    conns.append(conn)
        for conn in conns:
            self.conn_mgr.mark_repairing(conn)
        return self.launch_batch(moved, sorted(conns, key=lambda c: c.id), mode)
