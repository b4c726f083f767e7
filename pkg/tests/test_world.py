import math

import pytest
from hypothesis import given, settings, strategies as st

from manetsim.engine import RandomStreams, Simulator
from manetsim.errors import ConfigError, InvariantViolation
from manetsim.packet import Kind, Packet
from manetsim.world import Mobility, MobilityConfig, RadioModel, World

STILL = MobilityConfig(0, 0, 0)


def make_world(positions, **kw):
    sim = Simulator()
    w = World(sim, len(positions), mobility=kw.pop("mobility", STILL),
              positions=dict(enumerate(positions)), **kw)
    log = []
    w.on_receive = lambda n, p, s: log.append(("rx", n, p.pkt_id, s, sim.now))
    w.on_overhear = lambda n, p, s: log.append(("oh", n, p.pkt_id, s, sim.now))
    w.on_tx_fail = lambda s, p, d: log.append(("fail", s, p.pkt_id, d, sim.now))
    w.on_drop = lambda n, p, c: log.append(("drop", n, p.pkt_id, c, sim.now))
    return sim, w, log


def data(pid, dst=2):
    return Packet(Kind.DATA, pid, 0, dst, ttl=5, payload_bytes=100)


def test_unit_disk_neighbours():
    sim, w, _ = make_world([(0, 0), (250, 0), (250.001, 0)])
    assert w.neighbors(0) == {1}
    assert w.neighbors(1) == {0, 2}
    assert w.in_range(0, 1) and not w.in_range(0, 2)


def test_broadcast_reaches_all_neighbours_after_latency():
    sim, w, log = make_world([(0, 0), (100, 0), (0, 100), (400, 400)])
    w.transmit(0, Packet(Kind.RREQ, 1, 0, 3, ttl=3))
    sim.run_until(1)
    assert sorted(e[1] for e in log) == [1, 2]
    assert all(e[0] == "rx" and e[4] == pytest.approx(0.002) for e in log)


def test_unicast_is_overheard_by_other_neighbours():
    sim, w, log = make_world([(0, 0), (100, 0), (0, 100)])
    w.transmit(0, data(1), 1)
    sim.run_until(1)
    assert ("rx", 1, 1, 0, 0.002) in log
    assert ("oh", 2, 1, 0, 0.002) in log


def test_service_rate_spaces_departures():
    sim, w, log = make_world([(0, 0), (100, 0)], service_rate=100.0)
    for pid in range(3):
        w.transmit(0, data(pid, 1), 1)
    sim.run_until(1)
    times = [e[4] for e in log if e[0] == "rx"]
    assert times == pytest.approx([0.002, 0.012, 0.022])


def test_queue_overflow_drops_tail():
    sim, w, log = make_world([(0, 0), (100, 0)], queue_capacity=2)
    results = [w.transmit(0, data(pid, 1), 1) for pid in range(4)]
    assert results == [True, True, False, False]
    assert [e for e in log if e[0] == "drop"] == [
        ("drop", 0, 2, "QueueOverflow", 0.0), ("drop", 0, 3, "QueueOverflow", 0.0),
    ]


def test_unicast_out_of_range_reports_failure():
    sim, w, log = make_world([(0, 0), (300, 0)])
    w.transmit(0, data(7, 1), 1)
    sim.run_until(1)
    assert log == [("fail", 0, 7, 1, 0.0)]


def test_mac_loss_drops_addressed_copy():
    sim, w, log = make_world([(0, 0), (100, 0)], radio=RadioModel(250, 1.0))
    w.transmit(0, data(1, 1), 1)
    sim.run_until(1)
    assert log == [("drop", 1, 1, "MacLoss", 0.002)]


def test_world_rejects_bad_arguments():
    with pytest.raises(ConfigError):
        World(Simulator(), 0)
    with pytest.raises(ConfigError):
        World(Simulator(), 2, positions={0: (600, 0)})
    with pytest.raises(ConfigError):
        RadioModel(0)
    with pytest.raises(ConfigError):
        MobilityConfig(5, 1)


def test_mobility_moves_at_speed_and_pauses():
    import random
    m = Mobility((0.0, 0.0), 500, 500, MobilityConfig(1, 1, 5), random.Random(0))
    m.set_leg((0.0, 0.0), (100.0, 0.0), 10.0, 0.0)
    assert m.step(5.0) == pytest.approx((50.0, 0.0))
    assert m.step(12.0) == (100.0, 0.0)
    assert m.step(14.9) == (100.0, 0.0)


def test_mobility_time_cannot_go_back():
    import random
    m = Mobility((1.0, 1.0), 10, 10, MobilityConfig(), random.Random(0))
    m.step(3.0)
    with pytest.raises(InvariantViolation):
        m.step(2.0)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32), st.floats(0.0, 500.0))
def test_random_waypoint_stays_inside_area(seed, t):
    sim = Simulator()
    w = World(sim, 5, 300, 200, streams=RandomStreams(seed), mobility=MobilityConfig(0, 20, 1))
    for node in range(5):
        x, y = w.step_mobility(node, t)
        assert 0 <= x <= 300 and 0 <= y <= 200


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 500), st.floats(0, 500)), min_size=2, max_size=12),
       st.floats(1.0, 400.0))
def test_connectivity_is_symmetric(points, rng):
    sim, w, _ = make_world(points, radio=RadioModel(rng))
    for a in range(len(points)):
        for b in w.neighbors(a):
            assert a in w.neighbors(b)
            assert math.dist(points[a], points[b]) <= rng + 1e-9
