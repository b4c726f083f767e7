import pytest
from hypothesis import given, settings, strategies as st

from manetsim.errors import ConfigError
from manetsim.network import Network, simulate
from manetsim.packet import Kind, Packet
from manetsim.scenario import load_scenario
from manetsim.sentinel import (
    DetectorConfig, EntrustRecord, SuspectLedger, Verdict, classify_suspect, gap_test,
    sequence_gap,
)

from conftest import static_scenario

CFG = DetectorConfig(mode="iwatchdog")
POS = [(0, 0), (200, 0), (400, 0), (600, 0), (100, 60)]


def attacked(mode, **kw):
    return static_scenario(POS, [(0, 3, 4)], width=700, height=300, attackers=[4],
                           detection=mode, **kw)


def test_forged_number_is_flagged():
    assert sequence_gap(23451234, 150) == 23451084
    assert classify_suspect(23451234, 150, 60.0, CFG) is Verdict.MALICIOUS


def test_small_gap_is_congestion():
    assert sequence_gap(170, 150) == 20
    for loss in (0.0, 50.0, 100.0):
        assert classify_suspect(170, 150, loss, CFG) is Verdict.CONGESTION_REPAIR


def test_gap_alone_is_not_enough():
    assert classify_suspect(23451234, 150, 20.0, CFG) is Verdict.CONGESTION_REPAIR


def test_gap_test_edges():
    assert not gap_test(0, 0, 0.9)
    assert not gap_test(100, 200, 0.9)
    assert gap_test(1000, 100, 0.9)          # exactly rho
    assert not gap_test(1000, 101, 0.9)
    with pytest.raises(ValueError):
        classify_suspect(10, 1, 101.0, CFG)


def test_config_validation():
    for bad in (dict(mode="x"), dict(rho=1.0), dict(tau=0), dict(theta=150), dict(min_obs=30)):
        with pytest.raises(ConfigError):
            DetectorConfig(**bad)


def test_ledger_window_slides():
    led = SuspectLedger(7, size=4)
    for ok in (False, False, True, True):
        led.add(ok)
    assert led.loss_pct == 50.0
    led.add(True)
    led.add(True)
    assert led.loss_pct == 0.0
    assert SuspectLedger(1).loss_pct == 0.0


def test_entrust_record_resolves_once():
    rec = EntrustRecord(1, 2, 0.0, 0.1)
    rec.resolve("forwarded")
    with pytest.raises(ValueError):
        rec.resolve("timed_out")


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 10**9), st.integers(0, 10**9), st.floats(0, 100), st.integers(1, 1000))
def test_scale_invariance(s, c, loss, k):
    assert classify_suspect(k * s, k * c, loss, CFG) == classify_suspect(s, c, loss, CFG)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 10**9), st.integers(0, 10**9), st.floats(0, 100), st.floats(0, 100))
def test_loss_monotonicity(s, c, p1, p2):
    lo, hi = sorted((p1, p2))
    if classify_suspect(s, c, lo, CFG) is Verdict.MALICIOUS:
        assert classify_suspect(s, c, hi, CFG) is Verdict.MALICIOUS


def test_iwatchdog_isolates_attacker_and_flow_recovers():
    net, s = simulate(attacked("iwatchdog", duration=30))
    assert (s.tp, s.fp, s.fn) == (1, 0, 0)
    assert all(4 in a.blacklist for i, a in enumerate(net.agents) if i != 4)
    assert s.post_detection_pdr > 0.9
    assert net.agents[0].routes[3].next_hop == 1


def test_iwatchdog_waits_for_evidence():
    net, _ = simulate(attacked("iwatchdog", duration=30))
    verdicts = [r for r in net.trace if r.event == "Verdict" and r.suspect == 4]
    first = [r.outcome for r in verdicts[:5]]
    assert first[:4] == ["CongestionRepair"] * 4
    assert verdicts[-1].outcome == "Malicious"
    assert verdicts[-1].seq_suspect == 23451234


def test_watchdog_blames_on_first_timeout():
    net, s = simulate(attacked("watchdog", duration=30))
    verdicts = [r for r in net.trace if r.event == "Verdict"]
    assert verdicts[0].outcome == "Malicious" and verdicts[0].suspect == 4
    assert s.tp == 1


def test_no_detection_without_mode():
    net, s = simulate(attacked("none"))
    assert not [r for r in net.trace if r.event in ("Verdict", "Alert")]
    assert s.fn == 1


def test_malicious_verdicts_satisfy_both_tests():
    cfg = DetectorConfig()
    net, _ = simulate(attacked("iwatchdog", duration=30))
    blamed = [r for r in net.trace if r.event == "Verdict" and r.outcome == "Malicious"]
    assert blamed
    for r in blamed:
        assert r.d == r.seq_suspect - r.seq_current
        assert r.d / r.seq_suspect >= cfg.rho
        assert r.loss_pct > cfg.theta


def test_congestion_only_contrast():
    wd = simulate(load_scenario("congestion", ["detection.mode=watchdog"]))[1]
    iw_net, iw = simulate(load_scenario("congestion", ["detection.mode=iwatchdog"]))
    assert wd.malicious_verdicts >= 1
    assert iw.malicious_verdicts == 0
    assert iw.local_repairs >= 1
    assert not [r for r in iw_net.trace if r.event == "Alert"]
    assert iw.pdr > wd.pdr


def alert(pid, blamed, ttl=5, seq=0):
    return Packet(Kind.ALERT, pid, 0, -1, ttl=ttl, blamed=blamed, target_seq=seq)


def test_alert_handling_is_idempotent():
    net = Network(static_scenario([(0, 0), (100, 0), (200, 0)], [], detection="iwatchdog"))
    a = net.agents[1]
    a.update_route(2, 2, 105, 1)
    a.receive(alert(900, 2), 0)
    assert 2 in a.blacklist
    assert a.valid_route(2) is None
    queued = len(net.world.queues[1])
    a.receive(alert(900, 2), 0)
    assert len(net.world.queues[1]) == queued == 1


def test_alert_with_exhausted_ttl_is_not_relayed():
    net = Network(static_scenario([(0, 0), (100, 0), (200, 0)], [], detection="iwatchdog"))
    net.agents[1].receive(alert(901, 2, ttl=1), 0)
    assert 2 in net.agents[1].blacklist
    assert len(net.world.queues[1]) == 0


def test_alert_naming_self_is_ignored():
    net = Network(static_scenario([(0, 0), (100, 0), (200, 0)], [], detection="iwatchdog"))
    net.agents[1].receive(alert(902, 1), 0)
    assert net.agents[1].blacklist == set()


def test_alert_purges_only_anomalous_numbers():
    net = Network(static_scenario([(0, 0), (100, 0), (200, 0)], [], detection="iwatchdog"))
    a = net.agents[1]
    a.update_route(0, 0, 23451234, 1)
    a.update_route(2, 2, 105, 1)
    a.receive(alert(903, 7, seq=23451234), 0)
    assert 0 not in a.routes
    assert a.valid_route(2) is not None
    b = net.agents[2]
    b.update_route(0, 1, 104, 2)
    b.receive(alert(904, 7, seq=110), 1)        # plausible number: nothing purged
    assert b.valid_route(0) is not None
