"""Run counters and the three headline metrics: delivery ratio, throughput,
and control overhead per connection request.

Counting conventions (audited by the hand-count tests):
  * control_sent tallies logical message originations: one flood, one reply,
    or one failure notice each count once, however many hops relay them.
  * control_transmissions additionally counts every per-hop send, so flooding
    cost stays observable.
  * connection_requests counts RREQ floods issued by a node acting as the
    discovery source; local repairs qualify, cache-served route switches and
    hello beacons do not.
"""

from collections import Counter
from dataclasses import dataclass, field


@dataclass
class MetricsLedger:
    data_sent: int = 0
    data_received: int = 0
    bits_received: float = 0.0
    data_lost: int = 0
    control_sent: Counter = field(default_factory=Counter)
    control_transmissions: Counter = field(default_factory=Counter)
    connection_requests: int = 0
    drops_by_reason: Counter = field(default_factory=Counter)
    loop_alarms: int = 0
    run_duration: float = 0.0
    per_conn_bits: Counter = field(default_factory=Counter)
    per_conn_sent: Counter = field(default_factory=Counter)
    per_conn_received: Counter = field(default_factory=Counter)
    events: list[tuple] = field(default_factory=list)

    # -- recording ----------------------------------------------------------

    def count_sent(self, conn_id: int) -> None:
        self.data_sent += 1
        self.per_conn_sent[conn_id] += 1

    def count_lost(self, conn_id: int) -> None:
        self.data_lost += 1

    def count_received(self, conn_id: int, bits: float) -> None:
        self.data_received += 1
        self.bits_received += bits
        self.per_conn_bits[conn_id] += bits
        self.per_conn_received[conn_id] += 1

    def count_control(self, kind: str, origination: bool) -> None:
        self.control_transmissions[kind] += 1
        if origination:
            self.control_sent[kind] += 1

    def count_request(self) -> None:
        self.connection_requests += 1

    def count_drop(self, reason: str) -> None:
        self.drops_by_reason[reason] += 1

    def log(self, kind: str, *fields) -> None:
        self.events.append((kind, *fields))


def pdr(ledger: MetricsLedger) -> float:
    """Delivered fraction of emitted data packets; 1.0 for an idle run."""
    if ledger.data_sent == 0:
        return 1.0
    return ledger.data_received / ledger.data_sent


def _control_total(ledger: MetricsLedger, include_hello: bool) -> int:
    total = sum(ledger.control_sent.values())
    if not include_hello:
        total -= ledger.control_sent.get("hello", 0)
    return total


def overhead_per_request(ledger: MetricsLedger, include_hello: bool = False) -> float:
    if ledger.connection_requests == 0:
        return 0.0
    return _control_total(ledger, include_hello) / ledger.connection_requests


def throughput(ledger: MetricsLedger) -> float:
    """Network-wide delivered bits per second over the whole run."""
    if ledger.run_duration <= 0:
        raise ValueError(f"run_duration must be positive, got {ledger.run_duration}")
    return ledger.bits_received / ledger.run_duration


def per_connection_throughput(ledger: MetricsLedger) -> dict[int, float]:
    if ledger.run_duration <= 0:
        raise ValueError(f"run_duration must be positive, got {ledger.run_duration}")
    return {cid: bits / ledger.run_duration for cid, bits in sorted(ledger.per_conn_bits.items())}
