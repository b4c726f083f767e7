"""Node positions, random-waypoint mobility, unit-disk radio and drop-tail queues."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

from .engine import MAC_LOSS, MOBILITY, PLACEMENT, RandomStreams, Simulator, next_uniform
from .errors import ConfigError, InvariantViolation

BROADCAST = None


@dataclass(frozen=True)
class RadioModel:
    range: float = 250.0
    loss_prob: float = 0.0

    def __post_init__(self):
        if not self.range > 0:
            raise ConfigError(f"radio range must be > 0, got {self.range}", key="radio.range")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ConfigError(f"loss_prob must lie in [0, 1], got {self.loss_prob}", key="radio.loss_prob")


@dataclass(frozen=True)
class MobilityConfig:
    speed_min: float = 0.0
    speed_max: float = 10.0
    pause_s: float = 2.0

    def __post_init__(self):
        if self.speed_min < 0 or self.speed_max < self.speed_min:
            raise ConfigError(
                f"need 0 <= speed_min <= speed_max, got {self.speed_min}..{self.speed_max}",
                key="mobility.speed_max",
            )
        if self.pause_s < 0:
            raise ConfigError(f"pause must be >= 0, got {self.pause_s}", key="mobility.pause")


class Mobility:
    """Random-waypoint trajectory of a single node, advanced lazily.

    The current leg runs from ``start`` (left at ``leg_start``) toward
    ``waypoint`` at ``speed``; after arrival the node rests until
    ``pause_until`` and then draws the next waypoint and speed.
    """

    def __init__(self, start, width, height, cfg: MobilityConfig, rng, now=0.0):
        self.width = width
        self.height = height
        self.cfg = cfg
        self.rng = rng
        self.last_update = now
        self.position = start
        self._begin_leg(start, now)

    def _begin_leg(self, start, t):
        wx = next_uniform(self.rng, 0.0, self.width)
        wy = next_uniform(self.rng, 0.0, self.height)
        speed = next_uniform(self.rng, self.cfg.speed_min, self.cfg.speed_max)
        self.set_leg(start, (wx, wy), speed, t)

    def set_leg(self, start, waypoint, speed, t):
        self.start = start
        self.waypoint = waypoint
        self.speed = speed
        self.leg_start = t
        dist = math.dist(start, waypoint)
        if dist == 0.0:
            self.arrive_at = t
        elif speed <= 0.0:
            self.arrive_at = math.inf
        else:
            self.arrive_at = t + dist / speed
        self.pause_until = self.arrive_at + self.cfg.pause_s

    def step(self, now):
        """Position at ``now``; ``now`` may not precede the previous query."""
        if now < self.last_update:
            raise InvariantViolation(
                f"mobility queried at t={now} after t={self.last_update}"
            )
        self.last_update = now
        while now >= self.pause_until and self.speed > 0.0:
            self._begin_leg(self.waypoint, self.pause_until)
        if now >= self.arrive_at:
            pos = self.waypoint
        elif self.speed <= 0.0 or now <= self.leg_start:
            pos = self.start
        else:
            frac = (now - self.leg_start) / (self.arrive_at - self.leg_start)
            sx, sy = self.start
            wx, wy = self.waypoint
            pos = (sx + (wx - sx) * frac, sy + (wy - sy) * frac)
        x = min(max(pos[0], 0.0), self.width)
        y = min(max(pos[1], 0.0), self.height)
        self.position = (x, y)
        return self.position


class TxQueue:
    """Bounded FIFO drained at ``service_rate`` packets per second.

    The head packet leaves as soon as the transmitter is free; the
    transmitter is then busy for ``1 / service_rate`` seconds.
    """

    def __init__(self, capacity=50, service_rate=500.0):
        if capacity < 1:
            raise ConfigError(f"queue capacity must be >= 1, got {capacity}")
        if not service_rate > 0:
            raise ConfigError(f"service_rate must be > 0, got {service_rate}")
        self.capacity = capacity
        self.service_rate = service_rate
        self.backlog = deque()
        self.next_free = 0.0
        self.armed = False

    def __len__(self):
        return len(self.backlog)


class World:
    """Physical layer shared by all nodes of one run.

    Upper layers register callbacks:

    ``on_receive(node, pkt, sender)``
        addressed copy (unicast target or broadcast neighbour).
    ``on_overhear(node, pkt, sender)``
        promiscuous copy of a unicast addressed to someone else.
    ``on_depart(src, pkt, dst)``
        a queued packet actually went on the air.
    ``on_tx_fail(src, pkt, dst)``
        unicast target was out of range when the packet reached the head.
    ``on_drop(node, pkt, cause)``
        queue overflow or MAC loss of an addressed copy.
    """

    def __init__(
        self,
        sim: Simulator,
        node_count: int,
        width: float = 500.0,
        height: float = 500.0,
        radio: RadioModel | None = None,
        mobility: MobilityConfig | None = None,
        queue_capacity: int = 50,
        service_rate: float = 500.0,
        hop_latency: float = 0.002,
        streams: RandomStreams | None = None,
        positions: dict | None = None,
    ):
        if node_count < 1:
            raise ConfigError(f"need at least one node, got {node_count}")
        if not (width > 0 and height > 0):
            raise ConfigError(f"area must be positive, got {width}x{height}")
        if hop_latency < 0:
            raise ConfigError(f"hop latency must be >= 0, got {hop_latency}")
        self.sim = sim
        self.n = node_count
        self.width = width
        self.height = height
        self.radio = radio or RadioModel()
        self.mobility_cfg = mobility or MobilityConfig()
        self.hop_latency = hop_latency
        self.streams = streams or RandomStreams(0)
        self._loss_rng = self.streams.stream(MAC_LOSS)
        self.queues = [TxQueue(queue_capacity, service_rate) for _ in range(node_count)]

        positions = dict(positions or {})
        placement = self.streams.stream(PLACEMENT)
        self.mobility = []
        for node in range(node_count):
            # Draw for every node so fixed positions do not shift later draws.
            drawn = (next_uniform(placement, 0.0, width), next_uniform(placement, 0.0, height))
            start = positions.get(node, drawn)
            if not (0 <= start[0] <= width and 0 <= start[1] <= height):
                raise ConfigError(f"node {node} position {start} outside the area")
            rng = self.streams.stream(MOBILITY, node)
            self.mobility.append(Mobility(tuple(map(float, start)), width, height, self.mobility_cfg, rng))

        self._pos_time = -1.0
        self._pos_cache: list = []

        self.on_receive = _ignore
        self.on_overhear = _ignore
        self.on_depart = _ignore
        self.on_tx_fail = _ignore
        self.on_drop = _ignore

    def place(self, node, pos):
        """Restart ``node``'s trajectory from ``pos`` at the current time."""
        x, y = pos
        if not (0 <= x <= self.width and 0 <= y <= self.height):
            raise ConfigError(f"node {node} position {pos} outside the area")
        old = self.mobility[node]
        self.mobility[node] = Mobility((float(x), float(y)), self.width, self.height,
                                       self.mobility_cfg, old.rng, self.sim.now)
        self._pos_time = -1.0

    # -- geometry ---------------------------------------------------------

    def step_mobility(self, node: int, now: float | None = None):
        return self.mobility[node].step(self.sim.now if now is None else now)

    def positions(self):
        now = self.sim.now
        if now != self._pos_time:
            self._pos_cache = [m.step(now) for m in self.mobility]
            self._pos_time = now
        return self._pos_cache

    def position(self, node):
        return self.positions()[node]

    def neighbors(self, node: int) -> set:
        pos = self.positions()
        x, y = pos[node]
        r2 = self.radio.range * self.radio.range
        out = set()
        for other, (ox, oy) in enumerate(pos):
            if other != node:
                dx = ox - x
                dy = oy - y
                if dx * dx + dy * dy <= r2:
                    out.add(other)
        return out

    def in_range(self, a, b):
        pos = self.positions()
        (ax, ay), (bx, by) = pos[a], pos[b]
        dx, dy = ax - bx, ay - by
        return dx * dx + dy * dy <= self.radio.range * self.radio.range

    # -- transmission -----------------------------------------------------

    def transmit(self, src: int, pkt, dst: int | None = BROADCAST) -> bool:
        """Queue ``pkt`` at ``src``. Returns False when the queue was full."""
        q = self.queues[src]
        if len(q.backlog) >= q.capacity:
            self.on_drop(src, pkt, "QueueOverflow")
            return False
        q.backlog.append((pkt, dst))
        if len(q.backlog) > q.capacity:
            raise InvariantViolation(f"queue of node {src} exceeded capacity {q.capacity}")
        if not q.armed:
            q.armed = True
            self.sim.schedule(max(self.sim.now, q.next_free), self._service, src, kind="tx")
        return True

    def _service(self, src):
        q = self.queues[src]
        pkt, dst = q.backlog.popleft()
        now = self.sim.now
        q.next_free = now + 1.0 / q.service_rate
        if q.backlog:
            self.sim.schedule(q.next_free, self._service, src, kind="tx")
        else:
            q.armed = False

        nbrs = self.neighbors(src)
        if dst is not BROADCAST and dst not in nbrs:
            self.on_tx_fail(src, pkt, dst)
            return
        self.on_depart(src, pkt, dst)
        if nbrs:
            self.sim.schedule(
                now + self.hop_latency, self._deliver, src, pkt, dst, tuple(sorted(nbrs)),
                kind="rx",
            )

    def _deliver(self, src, pkt, dst, receivers):
        loss = self.radio.loss_prob
        rng = self._loss_rng
        for node in receivers:
            lost = loss > 0.0 and rng.random() < loss
            if dst is BROADCAST or node == dst:
                if lost:
                    self.on_drop(node, pkt, "MacLoss")
                else:
                    self.on_receive(node, pkt, src)
            elif not lost:
                self.on_overhear(node, pkt, src)

    def queued_packets(self):
        for q in self.queues:
            for pkt, _ in q.backlog:
                yield pkt


def _ignore(*_args):
    return None
