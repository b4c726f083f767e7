"""Packet representation shared by routing, detection and metrics."""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace


class Kind(str, enum.Enum):
    DATA = "Data"
    RREQ = "Rreq"
    RREP = "Rrep"
    RERR = "Rerr"
    ALERT = "Alert"


@dataclass(frozen=True, slots=True)
class Packet:
    kind: Kind
    pkt_id: int
    origin: int
    target: int
    origin_seq: int = 0
    target_seq: int = 0
    hop_count: int = 0
    ttl: int = 0
    payload_bytes: int = 0
    created_at: float = 0.0
    blamed: int | None = None
    rreq_id: int = 0
    # Node that generated an Rrep (the replier); forwarders leave it untouched.
    advertiser: int | None = None
    # Rerr only: (destination, sequence number) pairs now unreachable.
    unreachable: tuple = ()

    def __post_init__(self):
        if self.kind is Kind.DATA:
            if self.payload_bytes <= 0:
                raise ValueError("Data packets need payload_bytes > 0")
        elif self.payload_bytes != 0:
            raise ValueError(f"{self.kind.value} packets carry no payload")

    def next_hop_copy(self) -> "Packet":
        """Copy for the next hop: one more hop, one less ttl."""
        return replace(self, hop_count=self.hop_count + 1, ttl=self.ttl - 1)
