"""Discrete-event scheduler and seeded random streams."""
from __future__ import annotations

import heapq
import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Any, Callable

from .errors import ConfigError, SchedulingError

# Substream tags, XOR-ed into the run seed.
MOBILITY = 0x4D4F42494C495459
MAC_LOSS = 0x4D41434C4F5353
PLACEMENT = 0x504C414345

_SEED_LIMIT = 2**64


@dataclass
class Event:
    fire_at: float
    seq: int
    kind: str
    callback: Callable[..., Any] = field(repr=False)
    args: tuple = field(default=(), repr=False)
    cancelled: bool = False

    def cancel(self):
        self.cancelled = True


class Simulator:
    """Event queue ordered by (fire_at, insertion counter).

    Handlers run one at a time; a handler may schedule further events at
    or after the current time.
    """

    def __init__(self):
        self.now = 0.0
        self._heap: list[tuple[float, int, Event]] = []
        self._counter = itertools.count()
        self.dispatched = 0
        self.listeners: list[Callable[[Event], None]] = []

    def schedule(self, fire_at: float, callback, *args, kind: str = "call") -> Event:
        if not math.isfinite(fire_at):
            raise SchedulingError(f"non-finite event time {fire_at!r} for {kind}")
        if fire_at < self.now:
            raise SchedulingError(
                f"event {kind} scheduled at t={fire_at!r} before current time t={self.now!r}"
            )
        ev = Event(fire_at, next(self._counter), kind, callback, args)
        heapq.heappush(self._heap, (fire_at, ev.seq, ev))
        return ev

    def schedule_in(self, delay: float, callback, *args, kind: str = "call") -> Event:
        return self.schedule(self.now + delay, callback, *args, kind=kind)

    def __len__(self):
        return len(self._heap)

    def pending(self):
        """Scheduled, not-yet-cancelled events in dispatch order."""
        return [ev for _, _, ev in sorted(self._heap) if not ev.cancelled]

    def run_until(self, end: float) -> int:
        """Dispatch every event with fire_at <= end. Returns the dispatch count."""
        if end < 0:
            raise ConfigError(f"run_until end must be >= 0, got {end}")
        heap = self._heap
        count = 0
        listeners = self.listeners
        while heap and heap[0][0] <= end:
            fire_at, _, ev = heapq.heappop(heap)
            if ev.cancelled:
                continue
            self.now = fire_at
            for listener in listeners:
                listener(ev)
            ev.callback(*ev.args)
            count += 1
        self.dispatched += count
        return count


def check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError(f"seed must be an integer, got {seed!r}")
    if not 0 <= seed < _SEED_LIMIT:
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


class RandomStreams:
    """Per-subsystem generators derived from one run seed.

    Each substream is seeded with ``seed ^ tag`` so draws in one subsystem
    never shift another subsystem's sequence.
    """

    def __init__(self, seed: int):
        self.seed = check_seed(seed)
        self._streams: dict[tuple, random.Random] = {}

    def stream(self, tag: int, index: int | None = None) -> random.Random:
        key = (tag, index)
        rng = self._streams.get(key)
        if rng is None:
            base = self.seed ^ tag
            rng = random.Random(base if index is None else (base, index).__repr__())
            self._streams[key] = rng
        return rng


def next_uniform(rng: random.Random, lo: float, hi: float) -> float:
    """Draw from [lo, hi); a degenerate interval returns lo."""
    if lo > hi:
        raise ConfigError(f"uniform interval has lo > hi ({lo} > {hi})")
    if lo == hi:
        return lo
    value = lo + (hi - lo) * rng.random()
    if value >= hi:
        value = math.nextafter(hi, lo)
    return value
