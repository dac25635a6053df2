"""Per-connection packet generation, forwarding, and delivery accounting.

Datagram flows lose whatever cannot be forwarded; reliable flows keep a
fixed send window with timeout retransmission and a bounded repair buffer.
The emission interval tracks the connection's allocated bandwidth, so a
renegotiated connection visibly slows down.
"""

from collections import deque
from dataclasses import dataclass
from typing import Optional

from .connections import Connection, ConnState

DATAGRAM = "datagram"
RELIABLE = "reliable"


@dataclass(slots=True)
class DataPacket:
    conn_id: int
    seq: int
    created_at: float
    size_bits: int
    src: int
    dest: int
    hops: int = 0
    source_route: Optional[tuple] = None


class Flow:
    __slots__ = ("conn", "kind", "rate_bps", "next_seq", "emitting",
                 "buffer", "unacked", "rtt_est", "delivered", "delivered_order")

    def __init__(self, conn: Connection):
        self.conn = conn
        self.kind = conn.kind
        self.rate_bps = max(conn.demanded_bw, 1.0) * 1000.0
        self.next_seq = 0
        self.emitting = False
        self.buffer: deque[DataPacket] = deque()
        self.unacked: dict[int, list] = {}      # seq -> [packet, retries]
        self.rtt_est = 1.0
        self.delivered: set[int] = set()
        self.delivered_order: list[int] = []


class TrafficManager:
    def __init__(self, sim):
        self.sim = sim
        self.engine = sim.engine
        self.world = sim.world
        self.metrics = sim.metrics
        self.cfg = sim.cfg
        self.flows: dict[int, Flow] = {}

    def flow_for(self, conn: Connection) -> Flow:
        fl = self.flows.get(conn.id)
        if fl is None:
            fl = self.flows[conn.id] = Flow(conn)
        return fl

    # -- lifecycle ---------------------------------------------------------

    def on_conn_active(self, conn: Connection) -> None:
        fl = self.flow_for(conn)
        if conn.allocated_bw > 0:
            fl.rate_bps = conn.allocated_bw * 1000.0
        if fl.kind == RELIABLE:
            self._flush(fl)
        if not fl.emitting:
            fl.emitting = True
            self._schedule_emit(fl)

    def _interval(self, fl: Flow) -> float:
        return fl.conn.packet_size_bits / fl.rate_bps

    def _schedule_emit(self, fl: Flow) -> None:
        self.engine.schedule_in(self._interval(fl), lambda: self._emit(fl))

    def _stopped(self, fl: Flow) -> bool:
        conn = fl.conn
        if conn.state in (ConnState.DROPPED, ConnState.FAILED):
            return True
        stop = conn.stop_at
        return stop is not None and self.engine.now() >= stop

    # -- emission ------------------------------------------------------------

    def _emit(self, fl: Flow) -> None:
        if self._stopped(fl):
            fl.emitting = False
            return
        conn = fl.conn
        pkt = DataPacket(conn.id, fl.next_seq, self.engine.now(),
                         conn.packet_size_bits, conn.src, conn.dest)
        fl.next_seq += 1
        self.metrics.count_sent(conn.id)
        if conn.state is ConnState.ACTIVE:
            if fl.kind == RELIABLE:
                self._reliable_submit(fl, pkt)
            else:
                self._inject(fl, pkt)
        else:
            # no usable route right now
            if fl.kind == RELIABLE:
                self._buffer(fl, pkt)
            else:
                self.metrics.count_lost(conn.id)
        self._schedule_emit(fl)

    def _buffer(self, fl: Flow, pkt: DataPacket) -> None:
        if len(fl.buffer) >= self.cfg.reliable_buffer:
            self.metrics.count_lost(fl.conn.id)
            return
        fl.buffer.append(pkt)

    def _inject(self, fl: Flow, pkt: DataPacket) -> None:
        if self.sim.protocol.name == "dsr":
            pkt.source_route = fl.conn.route
        self._forward(pkt.src, pkt)

    # -- forwarding -------------------------------------------------------------

    def _forward(self, at: int, pkt: DataPacket) -> None:
        fl = self.flows[pkt.conn_id]
        if at == pkt.dest:
            self._deliver(at, pkt)
            return
        if pkt.hops >= self.cfg.ttl:
            self.metrics.loop_alarms += 1
            self.metrics.count_lost(pkt.conn_id)
            return
        proto = self.sim.protocol
        nxt = proto.next_hop(at, pkt)
        if nxt is None:
            self.metrics.count_lost(pkt.conn_id)
            proto.on_no_route(at, pkt)
            return
        if not self.world.can_transmit(at, nxt):
            self.metrics.count_lost(pkt.conn_id)
            proto.on_forward_failure(at, pkt, nxt)
            return
        delay = pkt.size_bits / fl.rate_bps + self.cfg.hop_latency
        pkt.hops += 1
        self.engine.schedule_in(delay, lambda: self._forward(nxt, pkt))

    def _deliver(self, at: int, pkt: DataPacket) -> None:
        if at != pkt.dest:
            raise AssertionError(
                f"packet for {pkt.dest} delivered at {at}: routing bug")
        fl = self.flows[pkt.conn_id]
        if pkt.seq not in fl.delivered:
            fl.delivered.add(pkt.seq)
            fl.delivered_order.append(pkt.seq)
            self.metrics.count_received(pkt.conn_id, pkt.size_bits)
        if fl.kind == RELIABLE:
            ack_delay = max(pkt.hops, 1) * self.cfg.hop_latency
            self.engine.schedule_in(ack_delay, lambda: self._on_ack(fl, pkt))

    # -- reliable machinery ---------------------------------------------------------

    def _reliable_submit(self, fl: Flow, pkt: DataPacket) -> None:
        if len(fl.unacked) >= self.cfg.reliable_window:
            self._buffer(fl, pkt)
            return
        self._transmit_reliable(fl, pkt)

    def _transmit_reliable(self, fl: Flow, pkt: DataPacket) -> None:
        entry = fl.unacked.get(pkt.seq)
        if entry is None:
            entry = fl.unacked[pkt.seq] = [pkt, 0]
        # fresh copy per attempt: the previous copy may still be in flight
        copy = DataPacket(pkt.conn_id, pkt.seq, pkt.created_at, pkt.size_bits,
                          pkt.src, pkt.dest)
        if self.sim.protocol.name == "dsr":
            copy.source_route = fl.conn.route
        attempt = entry[1]
        self._forward(copy.src, copy)
        timeout = 4.0 * fl.rtt_est
        self.engine.schedule_in(timeout, lambda: self._on_timeout(fl, pkt.seq, attempt))

    def _on_ack(self, fl: Flow, pkt: DataPacket) -> None:
        if pkt.seq in fl.unacked:
            del fl.unacked[pkt.seq]
            sample = self.engine.now() - pkt.created_at
            fl.rtt_est = 0.875 * fl.rtt_est + 0.125 * sample
            self._flush(fl)

    def _on_timeout(self, fl: Flow, seq: int, attempt: int) -> None:
        entry = fl.unacked.get(seq)
        if entry is None or entry[1] != attempt:
            return
        if entry[1] >= self.cfg.reliable_max_retries:
            del fl.unacked[seq]
            self.metrics.count_lost(fl.conn.id)
            self._flush(fl)
            return
        if fl.conn.state is ConnState.ACTIVE:
            entry[1] += 1
            self._transmit_reliable(fl, entry[0])
        else:
            # wait out the repair without burning a retry
            self.engine.schedule_in(1.0, lambda: self._on_timeout(fl, seq, attempt))

    def _flush(self, fl: Flow) -> None:
        while (fl.buffer and fl.conn.state is ConnState.ACTIVE
               and len(fl.unacked) < self.cfg.reliable_window):
            self._transmit_reliable(fl, fl.buffer.popleft())
