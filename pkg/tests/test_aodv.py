import pytest

from manetsim.aodv import AodvParams, RouteState
from manetsim.errors import ConfigError
from manetsim.network import Network, simulate
from manetsim.packet import Kind

from conftest import static_scenario

LINE5 = [(0, 0), (200, 0), (400, 0), (600, 0), (800, 0)]


def events(net, event, kind=None, node=None):
    return [r for r in net.trace if r.event == event
            and (kind is None or r.pkt_kind == kind)
            and (node is None or r.node == node)]


def test_five_node_line_delivers_everything():
    sc = static_scenario(LINE5, [(0, 4, 4)], width=800)
    net, s = simulate(sc)
    assert s.data_sent == 36
    assert s.pdr == 1.0
    assert net.agents[0].routes[4].hop_count == 4
    assert net.agents[0].routes[4].next_hop == 1


def test_neighbour_route_is_one_hop():
    net, s = simulate(static_scenario([(0, 0), (100, 0)], [(0, 1)]))
    assert s.pdr == 1.0
    e = net.agents[0].routes[1]
    assert (e.next_hop, e.hop_count, e.state) == (1, 1, RouteState.VALID)


def test_unreachable_destination_drops_after_retries():
    sc = static_scenario([(0, 0), (100, 0), (450, 0)], [(0, 2)], duration=8,
                         overrides=["flow.0.stop=1.5"])
    net, s = simulate(sc)
    assert (s.data_sent, s.data_delivered) == (1, 0)
    assert s.data_dropped_by_cause == {"NoRoute": 1}
    rreqs = events(net, "Send", "Rreq", node=0)
    # ring of ttl 3, then two network-wide retries
    assert [r.time for r in rreqs] == pytest.approx([1.0, 1.24, 1.24 + 2 * 35 * 0.04])
    drop = events(net, "Drop", "Data")[0]
    assert drop.time == pytest.approx(1.24 + 2 * 2 * 35 * 0.04)


def bare_agent():
    net = Network(static_scenario([(0, 0), (100, 0), (200, 0)], []))
    return net, net.agents[0]


def test_update_route_prefers_fresher_then_shorter():
    net, a = bare_agent()
    assert a.update_route(2, 1, 105, 3)
    assert not a.update_route(2, 2, 104, 1)     # stale
    assert not a.update_route(2, 2, 105, 3)     # tie keeps incumbent
    assert a.routes[2].next_hop == 1
    assert a.update_route(2, 2, 105, 2)         # shorter
    assert a.update_route(2, 1, 106, 9)         # fresher beats shorter
    assert (a.routes[2].next_hop, a.routes[2].hop_count) == (1, 9)


def test_update_route_replaces_unusable_incumbent_at_equal_seq():
    net, a = bare_agent()
    a.update_route(2, 1, 105, 1)
    a._invalidate(a.routes[2], bump=False)
    assert a.update_route(2, 2, 105, 4)
    assert a.routes[2].state is RouteState.VALID


def test_invalidation_bumps_sequence_number():
    net, a = bare_agent()
    a.update_route(2, 1, 105, 1)
    a._invalidate(a.routes[2])
    assert a.routes[2].dest_seq == 106
    assert a.valid_route(2) is None


def test_blacklisted_next_hop_never_installed():
    net, a = bare_agent()
    a.blacklist_node(1)
    assert not a.update_route(2, 1, 500, 1)
    assert 2 not in a.routes


def test_params_validation():
    with pytest.raises(ConfigError):
        AodvParams(start_ttl=0)
    with pytest.raises(ConfigError):
        AodvParams(seq_adopt_ratio=1.0)
    assert AodvParams().ring_wait(3) == pytest.approx(0.24)


def test_destination_adopts_only_plausible_requested_seq():
    net, a = bare_agent()
    a.adopt_seq(150)
    assert a.own_seq == 150
    a.adopt_seq(23451234)
    assert a.own_seq == 150
    a.adopt_seq(120)
    assert a.own_seq == 150


def test_intermediate_node_answers_from_cache():
    pos = [(0, 0), (200, 0), (400, 0), (600, 0)]
    sc = static_scenario(pos, [(1, 3), (0, 3)], width=600, overrides=["flow.1.start=3"])
    net, s = simulate(sc)
    assert s.pdr == 1.0
    replies = [r for r in events(net, "Send", "Rrep") if r.origin == 0]
    assert replies and replies[0].node == 1


def test_rreq_flood_bounded_by_node_count():
    pos = [(x * 150, y * 150) for x in range(4) for y in range(3)]
    sc = static_scenario(pos, [(0, 11), (2, 9)], width=500, height=500)
    net = Network(sc)
    sent = {}
    inner = net.world.on_depart

    def count(src, pkt, dst):
        if pkt.kind is Kind.RREQ:
            key = (pkt.origin, pkt.rreq_id)
            sent[key] = sent.get(key, 0) + 1
        inner(src, pkt, dst)

    net.world.on_depart = count
    net.run()
    assert sent and max(sent.values()) <= len(pos)


def move_at(net, t, node, pos):
    net.sim.schedule(t, net.world.place, node, pos)


def test_source_rediscovers_after_next_hop_leaves():
    pos = [(0, 0), (200, 0), (400, 0), (200, 100)]
    net = Network(static_scenario(pos, [(0, 2, 10)], width=500, height=500))
    net.sim.run_until(2.0)
    hop = net.agents[0].routes[2].next_hop
    move_at(net, 3.0, hop, (200, 480))
    s = net.run()
    assert net.agents[0].routes[2].next_hop != hop
    late = [r for r in events(net, "Recv", "Data", node=2) if r.time > 3.5]
    assert late
    assert s.data_dropped <= 2


def test_downstream_break_repaired_locally():
    pos = [(0, 0), (200, 0), (400, 0), (600, 0), (500, 100)]
    sc = static_scenario(pos, [(0, 3, 10)], width=800, height=300)
    net = Network(sc)
    net.sim.run_until(2.0)
    assert net.agents[2].routes[3].next_hop == 3
    move_at(net, 3.0, 3, (700, 150))
    s = net.run()
    repairs = events(net, "Repair", node=2)
    assert repairs and repairs[0].target == 3
    assert net.agents[2].routes[3].next_hop == 4
    # the source never hears about it
    assert not [r for r in events(net, "Send", "Rreq", node=0) if r.time > 3.0]
    assert s.pdr > 0.95


def test_failed_repair_escalates_to_route_error():
    pos = [(0, 0), (200, 0), (400, 0), (600, 0)]
    sc = static_scenario(pos, [(0, 3, 10)], width=1000, height=300)
    net = Network(sc)
    net.sim.run_until(2.0)
    move_at(net, 3.0, 3, (1000, 300))
    s = net.run()
    rerrs = events(net, "Send", "Rerr")
    assert rerrs
    assert s.data_dropped_by_cause.get("NoRoute", 0) > 0
    assert net.agents[0].valid_route(3) is None


def test_route_purged_during_repair_does_not_crash():
    net, a = bare_agent()
    a.update_route(2, 1, 23451234, 1)
    assert a.local_repair(2)
    a.purge_routes(1000)
    net.sim.run_until(5.0)
    assert 2 not in a.repairs
