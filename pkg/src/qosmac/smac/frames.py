from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from ..crosslayer import NO_ROUTE
from ..qos import TrafficClass

BROADCAST = -1


class FrameKind(enum.Enum):
    SYNC = "SYNC"
    DATA = "DATA"
    ACK = "ACK"


class RadioState(enum.Enum):
    SLEEP = "sleep"
    IDLE_LISTEN = "idle"
    RX = "rx"
    TX = "tx"


@dataclass(eq=False)
class Frame:
    kind: FrameKind
    src: int
    dst: int
    cls: Optional[TrafficClass] = None
    pid: int = -1
    origin_node: int = -1
    origin_time: int = 0
    enqueue_time: int = 0
    carrier_sense_start: Optional[int] = None
    tx_start_time: Optional[int] = None
    dss_delay_field: int = 0
    next_hop_field: int = NO_ROUTE
    payload_bits: int = 0
    # SYNC body: the announced schedule
    phase: int = 0
    active_duration: int = 0
    next_active_duration: int = 0
    next_sleep_at: int = 0
    switch_at: int = 0  # first window start that uses next_active_duration
    duty_cycle: float = 0.0
    is_primary: bool = False

    def dss_sample(self) -> int:
        if self.carrier_sense_start is None:
            raise ValueError(f"frame {self.pid} has no carrier-sense timestamp")
        return self.carrier_sense_start - self.enqueue_time


@dataclass(eq=False)
class Schedule:
    """One sleep/listen cycle a node follows.

    Windows start at ``phase + k * period``.  A duty-cycle change is held in
    ``pending_active`` and applied at ``pending_at``, a window start fixed
    when the first SYNC announcing it goes out on this schedule.
    """

    period: int
    active_duration: int
    phase: int
    sync_periods_left: int = 0
    is_primary: bool = False
    pending_active: Optional[int] = None
    pending_armed: bool = False
    pending_at: int = 0
    open: bool = False
    window_start: int = -1
    window_end: int = -1
    sync_due: bool = False
    # extra SYNCs still owed for an announced duty-cycle change; negative = not started
    repeats_left: int = 0
    resume_after: int = 0
    history: list = field(default_factory=list)

    def __post_init__(self):
        if not 0 < self.active_duration <= self.period:
            raise ValueError(f"active duration {self.active_duration} outside (0, {self.period}]")
        self.phase %= self.period
        if not self.history:
            self.history.append((-(1 << 62), self.active_duration))

    @property
    def duty_cycle(self) -> float:
        return 100.0 * self.active_duration / self.period

    def start_of(self, t: int) -> int:
        """Start of the cycle containing ``t``."""
        return t - (t - self.phase) % self.period

    def duration_for(self, start: int) -> int:
        dur = self.history[0][1]
        for since, d in self.history:
            if since <= start:
                dur = d
            else:
                break
        return dur

    def apply(self, start: int, duration: int) -> None:
        self.active_duration = duration
        self.history.append((start, duration))


@dataclass
class ScheduleCopy:
    """What a neighbour learned about one of a node's schedules from its SYNC."""

    period: int
    phase: int
    active_duration: int
    next_active: int
    switch_at: int
    heard_at: int = 0

    def duration_for(self, start: int) -> int:
        return self.next_active if start >= self.switch_at else self.active_duration

    def window_at(self, t: int) -> Optional[tuple[int, int]]:
        s = t - (t - self.phase) % self.period
        e = s + self.duration_for(s)
        if t < e:
            return s, e
        return None

    def next_start(self, t: int) -> int:
        s = t - (t - self.phase) % self.period
        return s + self.period if s <= t else s


@dataclass
class Reception:
    frame: Frame
    corrupted: bool = False
