import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from manetsim.connections import (AdmitOutcome, Connection, ConnectionManager,
                                  ConnState, NodeBandwidthLedger, Priority,
                                  select_drops)
from manetsim.metrics import MetricsLedger


def conn(cid, priority=Priority.BULK, demand=5.0, min_bw=None, src=0, dest=9):
    return Connection(cid, src, dest, priority, demand,
                      demand * 0.5 if min_bw is None else min_bw)


def manager(capacity=10.0, nodes=(0,), enforce=True):
    return ConnectionManager({n: capacity for n in nodes}, enforce,
                             metrics=MetricsLedger())


# -- admit ---------------------------------------------------------------

def test_admit_grants_full_demand_when_it_fits():
    mgr = manager()
    filler = conn(1, demand=4.0)
    mgr.register(filler)
    mgr.ledgers[0].grant(1, 4.0)
    c = conn(2, demand=5.0, min_bw=3.0)
    mgr.register(c)
    res = mgr.admit(0, c)
    assert res.outcome is AdmitOutcome.GRANTED
    assert res.bw == 5.0


def test_admit_renegotiates_to_residual_capacity():
    mgr = manager()
    filler = conn(1, demand=6.0)
    mgr.register(filler)
    mgr.ledgers[0].grant(1, 6.0)
    c = conn(2, demand=5.0, min_bw=3.0)
    mgr.register(c)
    res = mgr.admit(0, c)
    assert res.outcome is AdmitOutcome.RENEGOTIATED
    # free = 10 - 6 = 4, which sits between the 3.0 floor and the 5.0 demand
    assert res.bw == 4.0


def test_admit_rejects_without_eligible_victims():
    mgr = manager()
    filler = conn(1, Priority.REALTIME, demand=9.0, min_bw=9.0)
    mgr.register(filler)
    mgr.ledgers[0].grant(1, 9.0)
    c = conn(2, Priority.REALTIME, demand=5.0, min_bw=3.0)
    mgr.register(c)
    res = mgr.admit(0, c)
    assert res.outcome is AdmitOutcome.REJECTED
    assert mgr.ledgers[0].grants == {1: 9.0}


def test_admit_evicts_lower_priority_and_grants():
    mgr = manager()
    bulk = conn(1, Priority.BULK, demand=8.0, min_bw=4.0)
    mgr.register(bulk)
    mgr.ledgers[0].grant(1, 8.0)
    bulk.route = (0,)
    bulk.state = ConnState.ACTIVE
    c = conn(2, Priority.REALTIME, demand=5.0, min_bw=3.0)
    mgr.register(c)
    res = mgr.admit(0, c)
    assert res.outcome is AdmitOutcome.GRANTED
    assert res.bw == 5.0
    assert res.dropped == (1,)
    assert bulk.state is ConnState.DROPPED
    assert mgr.ledgers[0].grants == {2: 5.0}


# -- select_drops ------------------------------------------------------------

def drop_ledger(allocs):
    """allocs: list of (cid, priority, bw); returns (ledger, conn_of)."""
    led = NodeBandwidthLedger(0, capacity=1000.0)
    conns = {}
    for cid, prio, bw in allocs:
        led.grant(cid, bw)
        conns[cid] = conn(cid, prio, demand=bw, min_bw=bw)
    return led, conns.__getitem__


def test_one_big_drop_beats_two_small():
    led, conn_of = drop_ledger([(1, Priority.BULK, 5.0), (2, Priority.BULK, 2.0)])
    assert select_drops(led, 4.0, Priority.REALTIME, conn_of) == (1,)


def test_greedy_prefix_takes_both_when_needed():
    led, conn_of = drop_ledger([(1, Priority.BULK, 5.0), (2, Priority.BULK, 2.0)])
    assert set(select_drops(led, 6.0, Priority.REALTIME, conn_of)) == {1, 2}


def test_no_victims_at_or_above_incoming_priority():
    led, conn_of = drop_ledger([(1, Priority.REALTIME, 5.0),
                                (2, Priority.REALTIME, 2.0)])
    assert select_drops(led, 1.0, Priority.REALTIME, conn_of) == ()


def test_bulk_incoming_never_evicts():
    led, conn_of = drop_ledger([(1, Priority.BULK, 5.0)])
    assert select_drops(led, 1.0, Priority.BULK, conn_of) == ()


def test_needed_must_be_positive():
    led, conn_of = drop_ledger([(1, Priority.BULK, 5.0)])
    with pytest.raises(ValueError):
        select_drops(led, 0.0, Priority.REALTIME, conn_of)


def test_equal_bandwidth_ties_break_by_id():
    led, conn_of = drop_ledger([(3, Priority.BULK, 4.0), (1, Priority.BULK, 4.0)])
    assert select_drops(led, 3.0, Priority.REALTIME, conn_of) == (1,)


@settings(max_examples=300, deadline=None)
@given(bws=st.lists(st.integers(1, 6), min_size=1, max_size=8),
       needed=st.integers(1, 30))
def test_greedy_feasibility_matches_exhaustive_subsets(bws, needed):
    allocs = [(i + 1, Priority.BULK, float(b)) for i, b in enumerate(bws)]
    led, conn_of = drop_ledger(allocs)
    chosen = select_drops(led, float(needed), Priority.REALTIME, conn_of)
    feasible = any(
        sum(b for _, _, b in combo) >= needed
        for k in range(1, len(allocs) + 1)
        for combo in itertools.combinations(allocs, k))
    if feasible:
        assert chosen, f"greedy missed a feasible drop set for needed={needed}"
        assert sum(led.grants[c] for c in chosen) >= needed
    else:
        assert chosen == ()


# -- ledger invariants ----------------------------------------------------------

def test_capacity_overcommit_raises_at_the_mutation():
    led = NodeBandwidthLedger(0, capacity=10.0)
    led.grant(1, 6.0)
    with pytest.raises(AssertionError):
        led.grant(2, 5.0)


def test_release_returns_capacity():
    led = NodeBandwidthLedger(0, capacity=10.0)
    led.grant(1, 6.0)
    led.release(1)
    assert led.free == 10.0
    led.release(1)  # releasing twice is a no-op
    assert led.free == 10.0


# -- teardown -----------------------------------------------------------------------

def test_teardown_releases_grants_everywhere():
    mgr = manager(nodes=(0, 1, 2))
    c = conn(1, demand=4.0)
    mgr.register(c)
    for n in (0, 1, 2):
        mgr.ledgers[n].grant(1, 4.0)
    c.route = (0, 1, 2)
    c.state = ConnState.ACTIVE
    mgr.teardown(1, "policy")
    assert all(led.grants == {} for led in mgr.ledgers.values())
    assert c.state is ConnState.DROPPED


def test_teardown_is_idempotent():
    mgr = manager()
    c = conn(1)
    mgr.register(c)
    mgr.ledgers[0].grant(1, 2.5)
    c.state = ConnState.ACTIVE
    mgr.teardown(1, "policy")
    state_after = c.state
    mgr.teardown(1, "unreachable")
    assert c.state is state_after is ConnState.DROPPED
    assert mgr.metrics.drops_by_reason["policy"] == 1
    assert "unreachable" not in mgr.metrics.drops_by_reason


def test_freed_capacity_visible_to_next_admit():
    mgr = manager()
    a = conn(1, demand=8.0, min_bw=8.0)
    mgr.register(a)
    mgr.ledgers[0].grant(1, 8.0)
    a.state = ConnState.ACTIVE
    mgr.teardown(1, "unreachable")
    b = conn(2, demand=8.0, min_bw=4.0)
    mgr.register(b)
    assert mgr.admit(0, b).outcome is AdmitOutcome.GRANTED


# -- commit_route -------------------------------------------------------------------

def test_commit_route_levels_grants_to_route_minimum():
    mgr = manager(capacity=10.0, nodes=(0, 1, 2))
    filler = conn(9, demand=6.0)
    mgr.register(filler)
    mgr.ledgers[1].grant(9, 6.0)
    c = conn(1, demand=5.0, min_bw=2.0, src=0, dest=2)
    mgr.register(c)
    assert mgr.commit_route(c, (0, 1, 2)) is True
    # node 1 only had 4 free, so the whole route levels to 4
    assert c.allocated_bw == 4.0
    assert c.state is ConnState.ACTIVE
    assert mgr.ledgers[0].grants[1] == 4.0
    assert mgr.ledgers[1].grants[1] == 4.0
    assert mgr.ledgers[2].grants[1] == 4.0


def test_commit_route_rolls_back_on_rejection():
    mgr = manager(capacity=10.0, nodes=(0, 1, 2))
    filler = conn(9, Priority.REALTIME, demand=9.0, min_bw=9.0)
    mgr.register(filler)
    mgr.ledgers[1].grant(9, 9.0)
    c = conn(1, Priority.REALTIME, demand=5.0, min_bw=3.0, src=0, dest=2)
    mgr.register(c)
    assert mgr.commit_route(c, (0, 1, 2)) is False
    assert 1 not in mgr.ledgers[0].grants
    assert 1 not in mgr.ledgers[2].grants
    assert c.state is ConnState.DISCOVERING


def test_commit_route_releases_departed_nodes():
    mgr = manager(capacity=10.0, nodes=(0, 1, 2, 3))
    c = conn(1, demand=4.0, src=0, dest=3)
    mgr.register(c)
    assert mgr.commit_route(c, (0, 1, 3))
    assert 1 in mgr.ledgers[1].grants
    assert mgr.commit_route(c, (0, 2, 3))
    assert 1 not in mgr.ledgers[1].grants
    assert 1 in mgr.ledgers[2].grants


# -- ordering ---------------------------------------------------------------------------

def test_reestablish_order_realtime_first_then_by_id():
    c1 = conn(1, Priority.BULK)
    c2 = conn(2, Priority.REALTIME)
    assert [c.id for c in ConnectionManager.reestablish_order([c1, c2])] == [2, 1]


def test_reestablish_order_all_realtime_by_id():
    cs = [conn(i, Priority.REALTIME) for i in (3, 1, 2)]
    assert [c.id for c in ConnectionManager.reestablish_order(cs)] == [1, 2, 3]


def test_min_bw_above_demand_is_rejected_at_construction():
    with pytest.raises(ValueError):
        conn(1, demand=2.0, min_bw=3.0)
