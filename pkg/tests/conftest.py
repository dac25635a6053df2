import math

import pytest

from manetsim.connections import Connection, Priority
from manetsim.scenario import Scenario
from manetsim.sim import Simulation


def scripted_sim(nodes, connections=(), protocol="aodv", seed=1, **overrides):
    """Build a Simulation over an explicit topology.

    nodes: list of (id, x, y, range[, direction, speed]).
    """
    defaults = dict(name="script", node_count=max(len(nodes), 2),
                    sim_duration=60.0, hello_interval=1.0)
    defaults.update(overrides)
    cfg = Scenario(**defaults)
    return Simulation(cfg, seed, protocol, nodes=list(nodes),
                      connections=list(connections))


def line_nodes(count, spacing=200.0, range_=250.0, y=0.0):
    return [(i, i * spacing, y, range_) for i in range(count)]


def make_conn(cid=1, src=0, dest=3, priority=Priority.BULK, demand=256.0,
              kind="datagram", packet_size_bits=8000, start_at=1.0,
              stop_at=None, min_bw=None):
    return Connection(cid, src, dest, priority, demand,
                      demand * 0.5 if min_bw is None else min_bw,
                      kind=kind, packet_size_bits=packet_size_bits,
                      start_at=start_at, stop_at=stop_at)


@pytest.fixture
def line4():
    """S(0) - A(1) - B(2) - D(3), adjacent pairs only."""
    return line_nodes(4)


def bypass_nodes():
    """Line 0-1-2-3 plus node 4 reachable from 1 and 3 (a repair detour)."""
    nodes = line_nodes(4)
    nodes.append((4, 400.0, 120.0, 250.0))
    assert math.dist((400, 120), (200, 0)) <= 250
    assert math.dist((400, 120), (600, 0)) <= 250
    return nodes
