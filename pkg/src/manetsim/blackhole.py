"""Black-hole adversary: forged route replies and a silent data plane."""
from __future__ import annotations

from dataclasses import dataclass

from .aodv import AodvAgent
from .errors import ConfigError
from .packet import Kind, Packet

DEFAULT_FORGED_SEQ = 23451234


@dataclass(frozen=True)
class AttackerProfile:
    node: int
    forged_seq: int = DEFAULT_FORGED_SEQ
    forged_hops: int = 1
    active_from: float = 0.0
    place_near: int | None = None

    def __post_init__(self):
        if self.node < 0:
            raise ConfigError(f"attacker id must be >= 0, got {self.node}")
        if self.forged_seq < 1:
            raise ConfigError("forged_seq must be >= 1", key="attack.forged_seq")
        if self.forged_hops < 0:
            raise ConfigError("forged_hops must be >= 0", key="attack.forged_hops")
        if self.active_from < 0:
            raise ConfigError("active_from must be >= 0", key="attack.active_from")


class BlackHoleAgent(AodvAgent):
    """Routing agent that, once active, lures and swallows data traffic.

    Before ``active_from`` it behaves exactly like an honest node. Route
    errors, alerts and route replies for others are always handled
    honestly.
    """

    def __init__(self, node, net, params=None, profile: AttackerProfile | None = None):
        super().__init__(node, net, params)
        self.profile = profile or AttackerProfile(node)

    @property
    def active(self):
        return self.now >= self.profile.active_from

    def answer_rreq(self, pkt, sender):
        if self.active and pkt.target != self.node:
            self.handle_rreq_blackhole(pkt, sender)
        else:
            super().answer_rreq(pkt, sender)

    def handle_rreq_blackhole(self, pkt, sender):
        """Reply at once with an unbeatable route; never re-flood."""
        rrep = Packet(
            Kind.RREP, self.net.new_id(), pkt.origin, pkt.target,
            origin_seq=pkt.origin_seq, target_seq=self.profile.forged_seq,
            hop_count=self.profile.forged_hops, ttl=self.p.net_diameter,
            created_at=self.now, advertiser=self.node,
        )
        self.net.log("Send", self.node, rrep)
        self._send(rrep, sender)

    def handle_data(self, pkt, sender):
        if self.active and pkt.target != self.node:
            self.handle_data_blackhole(pkt, sender)
        else:
            super().handle_data(pkt, sender)

    def handle_data_blackhole(self, pkt, sender):
        self.net.log("Recv", self.node, pkt)
        self.net.drop(self.node, pkt, "BlackHole")

    def _route_data(self, pkt):
        # Anything buffered before activation dies here.
        if self.active:
            self.net.drop(self.node, pkt, "BlackHole")
            return
        super()._route_data(pkt)
