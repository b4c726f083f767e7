"""On-demand distance-vector routing agent (one instance per node)."""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass

from .errors import ConfigError, InvariantViolation
from .packet import Kind, Packet
from .world import BROADCAST


class RouteState(str, enum.Enum):
    VALID = "Valid"
    UNDER_REPAIR = "UnderRepair"
    INVALID = "Invalid"


@dataclass
class RouteEntry:
    dest: int
    next_hop: int
    dest_seq: int
    hop_count: int
    expires_at: float
    state: RouteState = RouteState.VALID


@dataclass(frozen=True)
class AodvParams:
    net_diameter: int = 35
    start_ttl: int = 3
    rreq_retries: int = 2
    node_traversal_s: float = 0.04
    route_lifetime_s: float = 10.0
    repair_ttl: int = 3
    repair_timeout_s: float = 0.5
    pending_limit: int = 64
    rreq_cache_s: float = 5.0
    # Starting value of every honest node's own sequence number.
    initial_seq: int = 100
    # A destination only adopts a requested sequence number below this
    # multiple of its own; larger requests are treated as poisoned.
    seq_adopt_ratio: float = 10.0

    def __post_init__(self):
        for name in ("net_diameter", "start_ttl", "repair_ttl", "pending_limit"):
            if getattr(self, name) < 1:
                raise ConfigError(f"aodv.{name} must be >= 1", key=f"aodv.{name}")
        if self.rreq_retries < 0:
            raise ConfigError("aodv.rreq_retries must be >= 0", key="aodv.rreq_retries")
        for name in ("node_traversal_s", "route_lifetime_s", "repair_timeout_s", "rreq_cache_s"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"aodv.{name} must be > 0", key=f"aodv.{name}")
        if self.initial_seq < 0:
            raise ConfigError("aodv.initial_seq must be >= 0", key="aodv.initial_seq")
        if not self.seq_adopt_ratio > 1:
            raise ConfigError("aodv.seq_adopt_ratio must be > 1", key="aodv.seq_adopt_ratio")

    def ring_wait(self, ttl):
        return 2.0 * ttl * self.node_traversal_s


class AodvAgent:
    """Routing state and packet handlers for one node.

    ``net`` supplies the clock, the radio, packet ids and trace logging;
    see :class:`manetsim.network.Network`.
    """

    def __init__(self, node: int, net, params: AodvParams | None = None):
        self.node = node
        self.net = net
        self.p = params or AodvParams()
        self.own_seq = self.p.initial_seq
        self.rreq_id = 0
        self.routes: dict[int, RouteEntry] = {}
        self.seen_rreq: dict[tuple, float] = {}
        self.pending: deque[Packet] = deque()
        self.discovery: dict[int, object] = {}
        self.repairs: dict[int, object] = {}
        self.blacklist: set[int] = set()
        self.flow_dests: set[int] = set()
        self.sentinel = None
        self.route_listener = None

    @property
    def now(self):
        return self.net.sim.now

    # -- route table --------------------------------------------------------

    def valid_route(self, dest):
        e = self.routes.get(dest)
        if e is None or e.state is not RouteState.VALID:
            return None
        if e.expires_at < self.now:
            e.state = RouteState.INVALID
            return None
        if e.next_hop in self.blacklist:
            return None
        return e

    def update_route(self, dest, next_hop, seq, hops) -> bool:
        """Install or refresh a route if the offer is fresher or shorter.

        Accepted when the sequence number is larger, or equal with either
        fewer hops or a non-usable incumbent. Remaining ties keep the
        incumbent.
        """
        if dest == self.node or next_hop in self.blacklist:
            return False
        now = self.now
        e = self.routes.get(dest)
        if e is None:
            e = RouteEntry(dest, next_hop, seq, hops, now + self.p.route_lifetime_s)
            self.routes[dest] = e
            self._notify(e)
            return True
        usable = e.state is RouteState.VALID and e.expires_at >= now and e.next_hop not in self.blacklist
        if seq > e.dest_seq or (seq == e.dest_seq and (hops < e.hop_count or not usable)):
            if seq < e.dest_seq:
                raise InvariantViolation(f"node {self.node}: dest_seq for {dest} would decrease")
            e.next_hop = next_hop
            e.dest_seq = seq
            e.hop_count = hops
            e.state = RouteState.VALID
            e.expires_at = now + self.p.route_lifetime_s
            self._notify(e)
            return True
        if usable and e.next_hop == next_hop and seq == e.dest_seq:
            e.expires_at = max(e.expires_at, now + self.p.route_lifetime_s)
        return False

    def _invalidate(self, e: RouteEntry, state=RouteState.INVALID, bump=True):
        if bump:
            e.dest_seq += 1
        e.state = state
        self._notify(e)

    def _notify(self, e, event="update"):
        if self.route_listener is not None:
            self.route_listener(self.node, e, event)

    def purge_routes(self, min_seq):
        """Forget every route whose sequence number is at least ``min_seq``.

        Used once an attacker is confirmed: numbers that high can only
        have come from its forged replies.
        """
        doomed = [d for d, e in self.routes.items() if e.dest_seq >= min_seq]
        for dest in doomed:
            self._notify(self.routes.pop(dest), "purge")
        return doomed

    # -- sending helpers ----------------------------------------------------

    def _send(self, pkt, dst=BROADCAST):
        self.net.world.transmit(self.node, pkt, dst)

    def _buffer(self, pkt):
        self.pending.append(pkt)
        if len(self.pending) > self.p.pending_limit:
            self.net.drop(self.node, self.pending.popleft(), "NoRoute")

    def _flush(self, dest):
        if not any(p.target == dest for p in self.pending):
            return
        keep = deque()
        ready = []
        for p in self.pending:
            (ready if p.target == dest else keep).append(p)
        self.pending = keep
        for p in ready:
            self._route_data(p)

    def _drop_pending(self, dest, cause="NoRoute"):
        keep = deque()
        for p in self.pending:
            if p.target == dest:
                self.net.drop(self.node, p, cause)
            else:
                keep.append(p)
        self.pending = keep

    # -- traffic entry point ------------------------------------------------

    def send_data(self, dest, payload_bytes):
        pkt = Packet(
            Kind.DATA, self.net.new_id(), self.node, dest,
            ttl=self.p.net_diameter, payload_bytes=payload_bytes, created_at=self.now,
        )
        self.flow_dests.add(dest)
        self.net.log("Send", self.node, pkt)
        self._route_data(pkt)
        return pkt

    # -- receive dispatch ---------------------------------------------------

    def receive(self, pkt: Packet, sender: int):
        if sender in self.blacklist:
            if pkt.kind is Kind.DATA:
                self.net.drop(self.node, pkt, "Isolated")
            return
        if self.sentinel is not None:
            self.sentinel.observe_overhear(sender, pkt)
        kind = pkt.kind
        if kind is Kind.DATA:
            self.handle_data(pkt, sender)
        elif kind is Kind.RREQ:
            self.handle_rreq(pkt, sender)
        elif kind is Kind.RREP:
            self.handle_rrep(pkt, sender)
        elif kind is Kind.RERR:
            self.handle_rerr(pkt, sender)
        elif kind is Kind.ALERT and self.sentinel is not None:
            self.sentinel.handle_alert(pkt, sender)

    def overhear(self, pkt: Packet, sender: int):
        if self.sentinel is not None and sender not in self.blacklist:
            self.sentinel.observe_overhear(sender, pkt)

    # -- data plane ---------------------------------------------------------

    def handle_data(self, pkt, sender):
        self.net.log("Recv", self.node, pkt)
        if pkt.target == self.node:
            return
        self.forward_data(pkt)

    def forward_data(self, pkt):
        if pkt.ttl <= 0:
            self.net.drop(self.node, pkt, "TtlExpired")
            return
        self._route_data(pkt)

    def _route_data(self, pkt):
        dest = pkt.target
        e = self.valid_route(dest)
        if e is None:
            self._buffer(pkt)
            self._route_missing(dest, pkt)
            return
        now = self.now
        e.expires_at = max(e.expires_at, now + self.p.route_lifetime_s)
        back = self.routes.get(pkt.origin)
        if back is not None and back.state is RouteState.VALID:
            back.expires_at = max(back.expires_at, now + self.p.route_lifetime_s)
        self._send(pkt.next_hop_copy(), e.next_hop)

    def _route_missing(self, dest, pkt):
        if dest in self.discovery or dest in self.repairs:
            return
        if pkt.origin == self.node:
            self.originate_route_request(dest)
            return
        e = self.routes.get(dest)
        back = self.routes.get(pkt.origin)
        if e is None or back is None or e.hop_count <= back.hop_count:
            if e is None:
                self.routes[dest] = e = RouteEntry(
                    dest, -1, 0, self.p.net_diameter, self.now, RouteState.INVALID
                )
                self._notify(e)
            self.local_repair(dest)
        else:
            if e.state is not RouteState.INVALID:
                self._invalidate(e)
            self._send_rerr([(dest, e.dest_seq)], None)
            self._drop_pending(dest)

    def on_departed(self, pkt, dst):
        """Our queued unicast made it onto the air toward ``dst``."""
        if pkt.kind is Kind.DATA:
            self.net.log("Forward", self.node, pkt)
            if self.sentinel is not None and dst != pkt.target:
                self.sentinel.record_entrust(dst, pkt)

    # -- route discovery ----------------------------------------------------

    def _new_rreq(self, dest, ttl, target_seq):
        self.own_seq += 1
        self.rreq_id += 1
        pkt = Packet(
            Kind.RREQ, self.net.new_id(), self.node, dest,
            origin_seq=self.own_seq, target_seq=target_seq, ttl=ttl,
            created_at=self.now, rreq_id=self.rreq_id,
        )
        self.seen_rreq[(self.node, self.rreq_id)] = self.now + self.p.rreq_cache_s
        self.net.log("Send", self.node, pkt)
        self._send(pkt)
        return pkt

    def originate_route_request(self, dest, attempt=0):
        if self.valid_route(dest) is not None:
            return
        known = self.routes.get(dest)
        ttl = self.p.start_ttl if attempt == 0 else self.p.net_diameter
        ttl = min(ttl, self.p.net_diameter)
        self._new_rreq(dest, ttl, known.dest_seq if known else 0)
        token = object()
        self.discovery[dest] = token
        self.net.sim.schedule_in(
            self.p.ring_wait(ttl), self._discovery_timeout, dest, token, attempt, kind="rreq-timeout"
        )

    def _discovery_timeout(self, dest, token, attempt):
        if self.discovery.get(dest) is not token:
            return
        del self.discovery[dest]
        if self.valid_route(dest) is not None:
            return
        if attempt < self.p.rreq_retries:
            self.originate_route_request(dest, attempt + 1)
        else:
            self._drop_pending(dest)

    def handle_rreq(self, pkt, sender):
        key = (pkt.origin, pkt.rreq_id)
        now = self.now
        if pkt.origin == self.node:
            return
        expiry = self.seen_rreq.get(key)
        if expiry is not None and expiry >= now:
            return
        self.seen_rreq[key] = now + self.p.rreq_cache_s
        self.update_route(pkt.origin, sender, pkt.origin_seq, pkt.hop_count + 1)
        self.answer_rreq(pkt, sender)

    def answer_rreq(self, pkt, sender):
        if pkt.target == self.node:
            self.adopt_seq(pkt.target_seq)
            self._reply(pkt, sender, self.own_seq, 0)
            return
        e = self.valid_route(pkt.target)
        if e is not None and e.dest_seq >= pkt.target_seq and e.next_hop != sender:
            self._reply(pkt, sender, e.dest_seq, e.hop_count)
            return
        if pkt.ttl > 1:
            self._send(pkt.next_hop_copy())

    def adopt_seq(self, requested):
        if self.own_seq < requested < self.p.seq_adopt_ratio * max(self.own_seq, 1):
            self.own_seq = requested

    def _reply(self, rreq, toward, seq, hops):
        rrep = Packet(
            Kind.RREP, self.net.new_id(), rreq.origin, rreq.target,
            origin_seq=rreq.origin_seq, target_seq=seq, hop_count=hops,
            ttl=self.p.net_diameter, created_at=self.now, advertiser=self.node,
        )
        self.net.log("Send", self.node, rrep)
        self._send(rrep, toward)

    def handle_rrep(self, pkt, sender):
        dest = pkt.target
        self.update_route(dest, sender, pkt.target_seq, pkt.hop_count + 1)
        if pkt.origin == self.node:
            if self.valid_route(dest) is not None:
                self.discovery.pop(dest, None)
                self.repairs.pop(dest, None)
                self._flush(dest)
            return
        if self.valid_route(dest) is not None:
            self._flush(dest)
        back = self.valid_route(pkt.origin)
        if back is None or pkt.ttl <= 1:
            self.net.drop(self.node, pkt, "RrepLost")
            return
        self._send(pkt.next_hop_copy(), back.next_hop)

    # -- route maintenance --------------------------------------------------

    def handle_tx_failure(self, pkt, dst):
        """Unicast to ``dst`` failed because it left radio range."""
        self.net.drop(self.node, pkt, "OutOfRange")
        self.handle_link_break(dst, pkt if pkt.kind is Kind.DATA else None)

    def handle_link_break(self, broken, failed=None):
        affected = [
            e for e in self.routes.values()
            if e.next_hop == broken and e.state is RouteState.VALID
        ]
        if not affected:
            return
        unreachable = []
        for e in affected:
            if failed is not None and e.dest == failed.target:
                if failed.origin == self.node or e.dest in self.flow_dests:
                    self._invalidate(e)
                    if any(p.target == e.dest for p in self.pending):
                        self.originate_route_request(e.dest)
                    continue
                back = self.routes.get(failed.origin)
                if back is None or e.hop_count <= back.hop_count:
                    self._invalidate(e, RouteState.UNDER_REPAIR)
                    self.local_repair(e.dest)
                    continue
            self._invalidate(e)
            unreachable.append((e.dest, e.dest_seq))
        if unreachable:
            self._send_rerr(unreachable, broken)

    def local_repair(self, dest, suspect=None, bump=True) -> bool:
        """Scoped re-discovery of ``dest`` from this node.

        Returns False when a repair for ``dest`` is already running. The
        outcome arrives later: a matching Rrep restores the route, or the
        timeout escalates to a route error. ``bump=False`` keeps the known
        destination sequence number, used when the link itself still works.
        """
        if dest in self.repairs:
            return False
        e = self.routes.get(dest)
        if e is None:
            return False
        if e.state is RouteState.VALID:
            self._invalidate(e, RouteState.UNDER_REPAIR, bump=bump)
        elif e.state is RouteState.INVALID:
            e.state = RouteState.UNDER_REPAIR
            self._notify(e)
        self.net.log("Repair", self.node, target=dest, suspect=suspect)
        self._new_rreq(dest, self.p.repair_ttl, e.dest_seq)
        token = object()
        self.repairs[dest] = token
        self.net.sim.schedule_in(
            self.p.repair_timeout_s, self._repair_timeout, dest, token, kind="repair-timeout"
        )
        return True

    def _repair_timeout(self, dest, token):
        if self.repairs.get(dest) is not token:
            return
        del self.repairs[dest]
        if self.valid_route(dest) is not None:
            return
        e = self.routes.get(dest)
        # the entry may have been purged while the repair was running
        if e is not None:
            if e.state is not RouteState.INVALID:
                e.state = RouteState.INVALID
                self._notify(e)
            self._send_rerr([(dest, e.dest_seq)], None)
        if dest in self.flow_dests and any(p.target == dest for p in self.pending):
            self.originate_route_request(dest)
        else:
            self._drop_pending(dest)

    def _send_rerr(self, unreachable, broken):
        pkt = Packet(
            Kind.RERR, self.net.new_id(), self.node, -1,
            ttl=self.p.net_diameter, created_at=self.now,
            blamed=broken, unreachable=tuple(unreachable),
        )
        self.net.log("Send", self.node, pkt)
        self._send(pkt)

    def handle_rerr(self, pkt, sender):
        gone = []
        for dest, seq in pkt.unreachable:
            e = self.routes.get(dest)
            if e is None or e.next_hop != sender or e.state is not RouteState.VALID:
                continue
            if seq > e.dest_seq:
                e.dest_seq = seq
            self._invalidate(e, bump=False)
            gone.append((dest, e.dest_seq))
        if gone and pkt.ttl > 1:
            self._send(Packet(
                Kind.RERR, pkt.pkt_id, pkt.origin, -1, ttl=pkt.ttl - 1,
                hop_count=pkt.hop_count + 1, created_at=pkt.created_at,
                blamed=pkt.blamed, unreachable=tuple(gone),
            ))

    # -- blacklist ----------------------------------------------------------

    def blacklist_node(self, suspect):
        """Refuse to route through or accept packets from ``suspect``."""
        if suspect == self.node or suspect in self.blacklist:
            return False
        self.blacklist.add(suspect)
        for e in self.routes.values():
            if e.next_hop == suspect and e.state is not RouteState.INVALID:
                self._invalidate(e)
        return True

    def in_flight(self):
        return [p for p in self.pending if p.kind is Kind.DATA]
