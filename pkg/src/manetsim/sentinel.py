"""Overhearing-based misbehaviour detection: baseline and improved watchdog."""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field

from .aodv import RouteState
from .errors import ConfigError
from .packet import Kind, Packet

MODES = ("none", "watchdog", "iwatchdog")


class Verdict(str, enum.Enum):
    BENIGN = "Benign"
    CONGESTION_REPAIR = "CongestionRepair"
    MALICIOUS = "Malicious"


@dataclass(frozen=True)
class DetectorConfig:
    mode: str = "none"
    tau: float = 0.1
    rho: float = 0.9
    theta: float = 20.0
    window: int = 20
    min_obs: int = 5

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"detection mode must be one of {MODES}, got {self.mode!r}",
                              key="detection.mode")
        if not self.tau > 0:
            raise ConfigError("tau must be > 0", key="detection.tau")
        if not 0.0 < self.rho < 1.0:
            raise ConfigError("rho must lie strictly between 0 and 1", key="detection.rho")
        if not 0.0 <= self.theta <= 100.0:
            raise ConfigError("theta must lie in [0, 100]", key="detection.theta")
        if self.window < 1:
            raise ConfigError("window must be >= 1", key="detection.window")
        if not 1 <= self.min_obs <= self.window:
            raise ConfigError("need 1 <= min_obs <= window", key="detection.min_obs")


def sequence_gap(seq_suspect: int, seq_current: int) -> int:
    return max(seq_suspect - seq_current, 0)


def gap_test(seq_suspect: int, seq_current: int, rho: float) -> bool:
    """True when the suspect's number dwarfs ours.

    The gap d = seq_suspect - seq_current must make up at least ``rho``
    of the suspect's own number, i.e. d is close to seq_suspect and far
    from seq_current.
    """
    if seq_suspect <= 0:
        return False
    return sequence_gap(seq_suspect, seq_current) >= rho * seq_suspect


def classify_suspect(seq_suspect, seq_current, loss_pct, cfg: DetectorConfig) -> Verdict:
    if not 0.0 <= loss_pct <= 100.0:
        raise ValueError(f"loss_pct must lie in [0, 100], got {loss_pct}")
    if gap_test(seq_suspect, seq_current, cfg.rho) and loss_pct > cfg.theta:
        return Verdict.MALICIOUS
    return Verdict.CONGESTION_REPAIR


@dataclass
class EntrustRecord:
    pkt_id: int
    suspect: int
    stored_at: float
    deadline: float
    resolved: str = "pending"

    def resolve(self, outcome):
        if self.resolved != "pending":
            raise ValueError(f"record {self.pkt_id} already {self.resolved}")
        self.resolved = outcome


@dataclass
class SuspectLedger:
    suspect: int
    size: int = 20
    window: deque = field(default=None)
    last_heard_seq: int | None = None

    def __post_init__(self):
        if self.window is None:
            self.window = deque(maxlen=self.size)

    def add(self, forwarded: bool):
        self.window.append(forwarded)

    @property
    def loss_pct(self) -> float:
        if not self.window:
            return 0.0
        return 100.0 * sum(1 for ok in self.window if not ok) / len(self.window)


class Sentinel:
    """Detector state for one watcher node.

    Attached to the node's routing agent; reads its own sequence number
    from it and asks it to repair or blacklist.
    """

    def __init__(self, agent, net, cfg: DetectorConfig):
        self.agent = agent
        self.node = agent.node
        self.net = net
        self.cfg = cfg
        self.enabled = cfg.mode != "none"
        self.records: dict[tuple, EntrustRecord] = {}
        self.ledgers: dict[int, SuspectLedger] = {}
        self.seen_alerts: set[int] = set()
        self.repair_hold: dict[int, float] = {}
        agent.sentinel = self

    def ledger(self, suspect) -> SuspectLedger:
        led = self.ledgers.get(suspect)
        if led is None:
            led = self.ledgers[suspect] = SuspectLedger(suspect, self.cfg.window)
        return led

    def record_entrust(self, suspect, pkt: Packet):
        if not self.enabled:
            return None
        now = self.net.sim.now
        rec = EntrustRecord(pkt.pkt_id, suspect, now, now + self.cfg.tau)
        self.records[(pkt.pkt_id, suspect)] = rec
        self.net.sim.schedule(rec.deadline, self._expire, rec, kind="watchdog")
        return rec

    def observe_overhear(self, heard_from, pkt: Packet):
        if not self.enabled:
            return
        kind = pkt.kind
        if kind is Kind.DATA:
            rec = self.records.get((pkt.pkt_id, heard_from))
            if rec is None or rec.resolved != "pending":
                return
            if self.net.sim.now <= rec.deadline:
                rec.resolve("forwarded")
                del self.records[(pkt.pkt_id, heard_from)]
                self.ledger(heard_from).add(True)
                self.net.log("Overhear", self.node, pkt, suspect=heard_from)
        elif kind is Kind.RREP:
            if pkt.advertiser == heard_from:
                self.ledger(heard_from).last_heard_seq = pkt.target_seq
        elif kind is Kind.RREQ:
            if pkt.origin == heard_from:
                self.ledger(heard_from).last_heard_seq = pkt.origin_seq

    def _expire(self, rec: EntrustRecord):
        if rec.resolved != "pending":
            return
        self.on_timeout(rec)

    def on_timeout(self, rec: EntrustRecord):
        rec.resolve("timed_out")
        self.records.pop((rec.pkt_id, rec.suspect), None)
        suspect = rec.suspect
        if suspect in self.agent.blacklist:
            return None
        led = self.ledger(suspect)
        led.add(False)
        loss = led.loss_pct
        seq_s = led.last_heard_seq
        seq_c = self.agent.own_seq
        d = sequence_gap(seq_s, seq_c) if seq_s is not None else None
        if self.cfg.mode == "watchdog":
            verdict = Verdict.MALICIOUS
        elif len(led.window) < self.cfg.min_obs or seq_s is None:
            verdict = Verdict.CONGESTION_REPAIR
        else:
            verdict = classify_suspect(seq_s, seq_c, loss, self.cfg)
        self.net.log(
            "Verdict", self.node, suspect=suspect, seq_suspect=seq_s, seq_current=seq_c,
            d=d, loss_pct=loss, outcome=verdict.value, pkt_id=rec.pkt_id,
        )
        self.act_on_verdict(suspect, verdict)
        return verdict

    def act_on_verdict(self, suspect, verdict: Verdict):
        agent = self.agent
        if verdict is Verdict.MALICIOUS:
            if not agent.blacklist_node(suspect):
                return
            led = self.ledgers.get(suspect)
            advertised = (led.last_heard_seq or 0) if led else 0
            self._purge(advertised)
            alert = Packet(
                Kind.ALERT, self.net.new_id(), self.node, -1,
                target_seq=advertised,
                ttl=agent.p.net_diameter, created_at=self.net.sim.now, blamed=suspect,
            )
            self.seen_alerts.add(alert.pkt_id)
            self.net.log("Alert", self.node, alert, suspect=suspect)
            self.net.world.transmit(self.node, alert)
        elif verdict is Verdict.CONGESTION_REPAIR:
            now = self.net.sim.now
            if self.repair_hold.get(suspect, -1.0) > now:
                return
            self.repair_hold[suspect] = now + agent.p.repair_timeout_s
            for dest, e in sorted(agent.routes.items()):
                if e.next_hop == suspect and e.state is RouteState.VALID:
                    agent.local_repair(dest, suspect=suspect, bump=False)

    def handle_alert(self, pkt: Packet, sender):
        if pkt.pkt_id in self.seen_alerts:
            return
        self.seen_alerts.add(pkt.pkt_id)
        if pkt.blamed == self.node:
            return
        if self.agent.blacklist_node(pkt.blamed):
            self._purge(pkt.target_seq)
            if pkt.ttl > 1:
                self.net.world.transmit(self.node, pkt.next_hop_copy())

    def _purge(self, advertised):
        # Only an anomalous advertised number marks routes as poisoned.
        if gap_test(advertised, self.agent.own_seq, self.cfg.rho):
            self.agent.purge_routes(advertised)

    def pending_records(self):
        return [r for r in self.records.values() if r.resolved == "pending"]
