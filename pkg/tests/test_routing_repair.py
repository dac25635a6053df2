"""Link-break handling: local repair vs source re-flood, failure fallback,
hello-driven loss detection, and the re-establishment batches."""

import pytest

from manetsim.connections import ConnState, Priority
from tests.conftest import bypass_nodes, line_nodes, make_conn, scripted_sim


def start_conn(sim, conn):
    sim.engine.schedule_at(conn.start_at,
                           lambda: sim._start_connection(conn))


def events(sim, kind):
    return [e for e in sim.metrics.events if e[0] == kind]


def break_link_1_2(sim, at=3.0):
    """Teleport node 2 straight up until it leaves node 1's range."""
    def move():
        st = sim.world.mobility_state(2)
        st.y0 += 300.0
    sim.engine.schedule_at(at, move)


class TestRepairWithDetour:
    """0-1-2-3 line plus detour node 4; the 1-2 link breaks mid-flow."""

    def run_proto(self, protocol):
        conn = make_conn(dest=3, packet_size_bits=16000, demand=256.0)
        sim = scripted_sim(bypass_nodes(), [conn], protocol=protocol,
                           sim_duration=20.0)
        start_conn(sim, conn)
        break_link_1_2(sim, at=3.0)
        sim.run()
        return sim, conn

    def test_new_repairs_locally_without_source_reflood(self):
        sim, conn = self.run_proto("new")
        assert conn.state is ConnState.ACTIVE
        assert conn.route == (0, 1, 4, 3)
        kinds = [e[4] for e in events(sim, "discovery_start")]
        assert kinds.count("initial") == 1
        assert kinds.count("repair") == 1
        assert "rediscovery" not in kinds
        # repair was initiated by the surviving upstream node, not the source
        repair = [e for e in events(sim, "discovery_start") if e[4] == "repair"][0]
        assert repair[2] == 1

    def test_aodv_source_refloods_after_failure_notice(self):
        sim, conn = self.run_proto("aodv")
        assert conn.state is ConnState.ACTIVE
        assert conn.route == (0, 1, 4, 3)
        kinds = [e[4] for e in events(sim, "discovery_start")]
        assert kinds.count("initial") == 1
        assert kinds.count("rediscovery") >= 1
        assert "repair" not in kinds
        # the break node told the source
        assert sim.metrics.control_sent["route_failure"] >= 1
        redisc = [e for e in events(sim, "discovery_start") if e[4] == "rediscovery"][0]
        assert redisc[2] == 0  # origin is the source

    def test_new_loses_less_than_aodv_during_the_break(self):
        sim_new, conn_new = self.run_proto("new")
        sim_aodv, conn_aodv = self.run_proto("aodv")
        lost_new = sim_new.metrics.data_sent - sim_new.metrics.data_received
        lost_aodv = sim_aodv.metrics.data_sent - sim_aodv.metrics.data_received
        assert lost_new <= lost_aodv


class TestRepairFailureFallback:
    """0-1-2-3 line with no detour: the repair cannot succeed."""

    def test_new_falls_back_to_source_then_fails(self):
        conn = make_conn(dest=3, packet_size_bits=16000)
        sim = scripted_sim(line_nodes(4), [conn], protocol="new",
                           sim_duration=30.0)
        start_conn(sim, conn)
        break_link_1_2(sim, at=3.0)
        sim.run()
        kinds = [e[4] for e in events(sim, "discovery_start")]
        assert "repair" in kinds
        # after the failed repair the source started a full discovery
        assert "rediscovery" in kinds
        assert conn.state is ConnState.FAILED
        assert sim.metrics.drops_by_reason["unreachable"] == 1
        # the repair node told the source about the dead end
        assert sim.metrics.control_sent["route_failure"] >= 1

    def test_literal_downstream_mode_runs(self):
        conn = make_conn(dest=3, packet_size_bits=16000)
        sim = scripted_sim(bypass_nodes(), [conn], protocol="new",
                           sim_duration=20.0, repair_initiator="downstream")
        start_conn(sim, conn)
        break_link_1_2(sim, at=3.0)
        sim.run()
        # the downstream survivor floods toward the destination; the upstream
        # side reports the break so the source refloods
        kinds = [e[4] for e in events(sim, "discovery_start")]
        assert kinds.count("initial") == 1
        assert conn.state is ConnState.ACTIVE
        assert conn.route[-1] == 3


class TestHelloDetection:
    def test_silent_neighbor_declared_lost(self):
        nodes = [(0, 0.0, 0.0, 250.0), (1, 240.0, 0.0, 250.0)]
        sim = scripted_sim(nodes, [], protocol="aodv")
        proto = sim.protocol
        proto.process_hello_timers(0)  # hears 1, starts tracking
        sim.world.mobility_state(1).x0 = 600.0  # silently leaves
        assert proto.process_hello_timers(0) == []   # first miss
        assert proto.process_hello_timers(0) == [1]  # second miss: lost

    def test_steady_neighbor_never_lost(self):
        nodes = [(0, 0.0, 0.0, 250.0), (1, 240.0, 0.0, 250.0)]
        sim = scripted_sim(nodes, [], protocol="aodv")
        proto = sim.protocol
        for _ in range(10):
            assert proto.process_hello_timers(0) == []

    def test_oscillation_slower_than_window_is_not_lost(self):
        nodes = [(0, 0.0, 0.0, 250.0), (1, 240.0, 0.0, 250.0)]
        sim = scripted_sim(nodes, [], protocol="aodv")
        proto = sim.protocol
        st = sim.world.mobility_state(1)
        proto.process_hello_timers(0)
        for _ in range(6):
            st.x0 = 260.0  # one silent beacon
            assert proto.process_hello_timers(0) == []
            st.x0 = 240.0  # back in range before the second miss
            assert proto.process_hello_timers(0) == []

    def test_beacon_tick_triggers_break_handling(self):
        # connection active over 0-1; node 1 goes silent; the beacon loop
        # must notice and start recovery without any data in flight
        conn = make_conn(dest=1, start_at=0.5)
        nodes = [(0, 0.0, 0.0, 250.0), (1, 240.0, 0.0, 250.0)]
        sim = scripted_sim(nodes, [conn], protocol="aodv", sim_duration=12.0,
                           hello_interval=1.0)
        start_conn(sim, conn)
        conn.stop_at = 2.0  # stop traffic so only hellos can detect

        def vanish():
            sim.world.mobility_state(1).x0 = 900.0
        sim.engine.schedule_at(4.0, vanish)
        sim.run()
        assert conn.state is ConnState.FAILED


class TestBatches:
    def make_two_conn_sim(self, mode):
        # both connections leave the source through node 1
        c_bulk = make_conn(cid=1, dest=3, priority=Priority.BULK,
                           packet_size_bits=16000)
        c_rt = make_conn(cid=2, dest=3, priority=Priority.REALTIME,
                         packet_size_bits=16000)
        sim = scripted_sim(bypass_nodes(), [c_bulk, c_rt], protocol="new",
                           sim_duration=25.0, reestablish_mode=mode)
        start_conn(sim, c_bulk)
        start_conn(sim, c_rt)
        break_link_1_2(sim, at=3.0)
        sim.run()
        return sim, c_bulk, c_rt

    @pytest.mark.parametrize("mode", ["serial", "parallel"])
    def test_realtime_launches_first(self, mode):
        sim, c_bulk, c_rt = self.make_two_conn_sim(mode)
        starts = [e for e in events(sim, "discovery_start") if e[4] == "repair"]
        assert [e[1] for e in starts][:2] == [2, 1]
        assert c_bulk.state is ConnState.ACTIVE
        assert c_rt.state is ConnState.ACTIVE

    def test_serial_defers_bulk_until_realtime_completes(self):
        sim, _, _ = self.make_two_conn_sim("serial")
        log = [e for e in sim.metrics.events
               if e[0] in ("discovery_start", "discovery_end") and e[5] is not None]
        open_realtime: dict[tuple, set] = {}
        for e in log:
            kind, conn_id, batch, prio = e[0], e[1], e[5], None
            if kind == "discovery_start":
                prio = e[6]
                if prio == "REALTIME":
                    open_realtime.setdefault(batch, set()).add(conn_id)
                elif prio == "BULK":
                    assert not open_realtime.get(batch), (
                        f"bulk discovery {conn_id} started while real-time "
                        f"discoveries {open_realtime.get(batch)} were open")
            else:
                open_realtime.get(e[5], set()).discard(e[1])
