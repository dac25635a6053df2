"""Multi-connection bookkeeping: per-node bandwidth ledgers, admission with
renegotiation, the priority/size drop heuristic, and priority-ordered
re-establishment batches."""

import enum
from dataclasses import dataclass, field


class Priority(enum.IntEnum):
    BULK = 0
    REALTIME = 1


class ConnState(enum.Enum):
    DISCOVERING = "discovering"
    ACTIVE = "active"
    REPAIRING = "repairing"
    DROPPED = "dropped"
    FAILED = "failed"


class AdmitOutcome(enum.Enum):
    GRANTED = "granted"
    RENEGOTIATED = "renegotiated"
    REJECTED = "rejected"


@dataclass(slots=True)
class AdmitResult:
    outcome: AdmitOutcome
    bw: float = 0.0
    dropped: tuple[int, ...] = ()


@dataclass
class Connection:
    id: int
    src: int
    dest: int
    priority: Priority
    demanded_bw: float          # kbps
    min_bw: float               # kbps, floor for renegotiation
    kind: str = "datagram"      # datagram | reliable
    packet_size_bits: int = 4096
    start_at: float = 0.0
    stop_at: float | None = None
    state: ConnState = ConnState.DISCOVERING
    allocated_bw: float = 0.0
    route: tuple[int, ...] = ()

    def __post_init__(self):
        if self.min_bw > self.demanded_bw:
            raise ValueError(
                f"conn {self.id}: min_bw {self.min_bw} exceeds demand {self.demanded_bw}")

    @property
    def live(self) -> bool:
        return self.state in (ConnState.ACTIVE, ConnState.REPAIRING)


class NodeBandwidthLedger:
    """Grant table for one node. Every mutation re-checks the capacity
    invariant so a violation surfaces at the exact event that caused it."""

    __slots__ = ("node", "capacity", "grants", "_granted_sum")

    def __init__(self, node: int, capacity: float):
        self.node = node
        self.capacity = capacity
        self.grants: dict[int, float] = {}
        self._granted_sum = 0.0

    @property
    def free(self) -> float:
        return self.capacity - self._granted_sum

    def grant(self, conn_id: int, bw: float) -> None:
        if conn_id in self.grants:
            raise RuntimeError(f"conn {conn_id} already granted at node {self.node}")
        self.grants[conn_id] = bw
        self._granted_sum += bw
        self._check()

    def resize(self, conn_id: int, bw: float) -> None:
        self._granted_sum += bw - self.grants[conn_id]
        self.grants[conn_id] = bw
        self._check()

    def release(self, conn_id: int) -> None:
        bw = self.grants.pop(conn_id, None)
        if bw is not None:
            self._granted_sum -= bw

    def _check(self) -> None:
        # Tiny epsilon absorbs float accumulation; grants are scenario-scale
        # kbps values so 1e-9 is far below any real quantum.
        if self._granted_sum > self.capacity + 1e-9:
            raise AssertionError(
                f"capacity exceeded at node {self.node}: "
                f"{self._granted_sum} > {self.capacity}")

    def verify(self) -> None:
        total = sum(self.grants.values())
        if abs(total - self._granted_sum) > 1e-6 or total > self.capacity + 1e-9:
            raise AssertionError(
                f"ledger drift at node {self.node}: cached={self._granted_sum} "
                f"actual={total} capacity={self.capacity}")


def select_drops(ledger: NodeBandwidthLedger, needed: float,
                 incoming_priority: Priority,
                 conn_of) -> tuple[int, ...]:
    """Pick victims freeing >= needed kbps, or () if impossible.

    Only connections of strictly lower priority than the incoming one are
    eligible. Victims are taken largest-allocation-first within the lowest
    priority class: one big drop beats several small ones.
    """
    if needed <= 0:
        raise ValueError(f"needed must be positive, got {needed}")
    candidates = [
        (conn_of(cid).priority, -bw, cid)
        for cid, bw in ledger.grants.items()
        if conn_of(cid).priority < incoming_priority
    ]
    candidates.sort()
    chosen: list[int] = []
    freed = 0.0
    for _, neg_bw, cid in candidates:
        chosen.append(cid)
        freed += -neg_bw
        if freed >= needed:
            return tuple(chosen)
    return ()


class ConnectionManager:
    """Owns connection lifecycles and, for the admission-controlled protocol,
    the per-node grant ledgers."""

    def __init__(self, capacities: dict[int, float], enforce_bandwidth: bool,
                 metrics=None):
        self.ledgers = {n: NodeBandwidthLedger(n, c) for n, c in capacities.items()}
        self.enforce_bandwidth = enforce_bandwidth
        self.connections: dict[int, Connection] = {}
        self.metrics = metrics

    def register(self, conn: Connection) -> None:
        self.connections[conn.id] = conn

    def conn(self, conn_id: int) -> Connection:
        return self.connections[conn_id]

    # -- admission ---------------------------------------------------------

    def can_admit(self, node: int, conn: Connection) -> bool:
        """Feasibility probe used while a route request floods: would admit()
        succeed here, counting droppable lower-priority grants? No mutation."""
        if not self.enforce_bandwidth:
            return True
        ledger = self.ledgers[node]
        if conn.id in ledger.grants:
            return True
        free = ledger.free
        if free >= conn.min_bw:
            return True
        droppable = sum(
            bw for cid, bw in ledger.grants.items()
            if self.connections[cid].priority < conn.priority)
        return free + droppable >= conn.min_bw

    def admit(self, node: int, conn: Connection) -> AdmitResult:
        """Grant bandwidth at one node, renegotiating down to the connection's
        floor and evicting lower-priority grants when that is what it takes."""
        ledger = self.ledgers[node]
        if conn.id in ledger.grants:
            raise RuntimeError(f"conn {conn.id} already granted at node {node}")
        free = ledger.free
        if free >= conn.demanded_bw:
            ledger.grant(conn.id, conn.demanded_bw)
            return AdmitResult(AdmitOutcome.GRANTED, conn.demanded_bw)
        if free >= conn.min_bw:
            ledger.grant(conn.id, free)
            return AdmitResult(AdmitOutcome.RENEGOTIATED, free)
        victims = select_drops(ledger, conn.min_bw - free, conn.priority,
                               self.connections.__getitem__)
        if not victims:
            return AdmitResult(AdmitOutcome.REJECTED)
        for cid in victims:
            self.teardown(cid, "policy", evicted_for=conn)
        free = ledger.free
        bw = min(free, conn.demanded_bw)
        ledger.grant(conn.id, bw)
        outcome = AdmitOutcome.GRANTED if bw == conn.demanded_bw else AdmitOutcome.RENEGOTIATED
        return AdmitResult(outcome, bw, victims)

    def commit_route(self, conn: Connection, route: tuple[int, ...]) -> bool:
        """Install a route atomically: admit at every newly joining node,
        release nodes the connection no longer traverses, then level all
        grants to the route-wide minimum. Rolls back on mid-route rejection."""
        if not self.enforce_bandwidth:
            conn.route = route
            conn.allocated_bw = conn.demanded_bw
            conn.state = ConnState.ACTIVE
            return True
        old_nodes = set(conn.route)
        placed: list[int] = []
        for node in route:
            if conn.id in self.ledgers[node].grants:
                continue
            res = self.admit(node, conn)
            if res.outcome is AdmitOutcome.REJECTED:
                for n in placed:
                    self.ledgers[n].release(conn.id)
                return False
            placed.append(node)
            if self.metrics is not None:
                self.metrics.log("admit", conn.id, node, res.outcome.value, res.bw)
        for node in old_nodes - set(route):
            self.ledgers[node].release(conn.id)
        allocated = min(self.ledgers[n].grants[conn.id] for n in route)
        for node in route:
            self.ledgers[node].resize(conn.id, allocated)
        conn.route = route
        conn.allocated_bw = allocated
        conn.state = ConnState.ACTIVE
        return True

    # -- lifecycle ---------------------------------------------------------

    def mark_repairing(self, conn: Connection) -> None:
        if conn.state is ConnState.ACTIVE:
            conn.state = ConnState.REPAIRING
            conn.allocated_bw = 0.0

    def release_all(self, conn: Connection) -> None:
        for ledger in self.ledgers.values():
            ledger.release(conn.id)

    def teardown(self, conn_id: int, reason: str, evicted_for=None) -> None:
        conn = self.connections[conn_id]
        if conn.state in (ConnState.DROPPED, ConnState.FAILED):
            return
        self.release_all(conn)
        conn.allocated_bw = 0.0
        conn.state = ConnState.DROPPED if reason == "policy" else ConnState.FAILED
        if self.metrics is not None:
            self.metrics.count_drop(reason)
            incoming = evicted_for.priority.name if evicted_for is not None else ""
            self.metrics.log("teardown", conn_id, reason, conn.priority.name, incoming)

    # -- re-establishment ordering ------------------------------------------

    @staticmethod
    def reestablish_order(conns: list[Connection]) -> list[Connection]:
        """Real-time connections first, ties broken by ascending id."""
        return sorted(conns, key=lambda c: (-c.priority, c.id))

    def verify_capacity(self) -> None:
        for ledger in self.ledgers.values():
            ledger.verify()
