"""Deterministic discrete-event engine.

Time is an integer tick count, one tick per microsecond.  Events with equal
fire times dispatch in ascending sequence number, so a run is a pure function
of its configuration and master seed.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

TICKS_PER_SECOND = 1_000_000
TICKS_PER_MS = 1_000


def seconds(s: float) -> int:
    return int(round(s * TICKS_PER_SECOND))


def ms(v: float) -> int:
    return int(round(v * TICKS_PER_MS))


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled before the current clock."""


@dataclass(eq=False)
class Event:
    fire_at: int
    target: Any = None
    kind: str = "timer"
    callback: Optional[Callable[["Event"], None]] = None
    data: Any = None
    seq: Optional[int] = None
    cancelled: bool = False

    def cancel(self) -> None:
        self.cancelled = True


@dataclass
class Kernel:
    trace: bool = False
    now: int = 0
    dispatched: int = 0
    log: list = field(default_factory=list)

    def __post_init__(self):
        self._queue: list = []
        self._next_seq = 0
        self._explicit: set = set()

    def schedule(self, ev: Event) -> Event:
        if ev.fire_at < self.now:
            raise SchedulingError(
                f"event {ev.kind!r} for {ev.target!r} at {ev.fire_at} is before clock {self.now}"
            )
        if ev.seq is None:
            while self._next_seq in self._explicit:
                self._next_seq += 1
            ev.seq = self._next_seq
            self._next_seq += 1
        else:
            if ev.seq < self._next_seq or ev.seq in self._explicit:
                raise SchedulingError(f"sequence number {ev.seq} already used")
            self._explicit.add(ev.seq)
        heapq.heappush(self._queue, (ev.fire_at, ev.seq, ev))
        return ev

    def at(self, t: int, callback, target=None, kind: str = "timer", data=None) -> Event:
        return self.schedule(Event(t, target, kind, callback, data))

    def after(self, delay: int, callback, target=None, kind: str = "timer", data=None) -> Event:
        return self.schedule(Event(self.now + delay, target, kind, callback, data))

    def pending(self) -> int:
        return sum(1 for _, _, ev in self._queue if not ev.cancelled)

    def run_until(self, t_end: int) -> int:
        """Dispatch every live event with ``fire_at <= t_end``; leave the clock at ``t_end``."""
        if t_end < self.now:
            raise SchedulingError(f"run_until({t_end}) is before clock {self.now}")
        queue = self._queue
        count = 0
        while queue and queue[0][0] <= t_end:
            fire_at, seq, ev = heapq.heappop(queue)
            if ev.cancelled:
                continue
            self.now = fire_at
            if self.trace:
                self.log.append((fire_at, seq, ev.target, ev.kind))
            count += 1
            if ev.callback is not None:
                ev.callback(ev)
        self.now = t_end
        self.dispatched += count
        return count

    def trace_digest(self) -> str:
        h = hashlib.sha256()
        for rec in self.log:
            h.update(repr(rec).encode())
        return h.hexdigest()


class RngStream:
    """One reproducible pseudo-random stream, keyed by (master seed, stream id)."""

    def __init__(self, seed: int, stream_id: int):
        self.seed = seed
        self.stream_id = stream_id
        digest = hashlib.sha256(f"qosmac:{seed}:{stream_id}".encode()).digest()
        self._rng = random.Random(int.from_bytes(digest, "big"))
        self.draws = 0

    def uniform_int(self, lo: int, hi: int) -> int:
        if lo > hi:
            raise ValueError(f"empty range [{lo}, {hi}]")
        self.draws += 1
        return self._rng.randint(lo, hi)

    def random(self) -> float:
        self.draws += 1
        return self._rng.random()

    def expovariate(self, rate: float) -> float:
        self.draws += 1
        return self._rng.expovariate(rate)


def uniform_int(stream: RngStream, lo: int, hi: int) -> int:
    return stream.uniform_int(lo, hi)
