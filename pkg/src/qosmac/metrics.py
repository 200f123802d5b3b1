"""Per-run bookkeeping: packet fates, sink deliveries, adaptation and ledger logs."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from statistics import fmean
from typing import Optional

from .qos import TrafficClass

SINK = "sink"
DROPPED = "dropped"


@dataclass
class Delivery:
    cls: TrafficClass
    origin_node: int
    origin_time: int
    sink_time: int
    pid: int

    @property
    def delay(self) -> int:
        return self.sink_time - self.origin_time


@dataclass
class MetricsLog:
    scheme: str = "baseline"
    deliveries: list = field(default_factory=list)
    generated: Counter = field(default_factory=Counter)
    drops: Counter = field(default_factory=Counter)
    adaptations: list = field(default_factory=list)
    ledger: list = field(default_factory=list)
    routes: list = field(default_factory=list)
    location: dict = field(default_factory=dict)
    pkt_class: dict = field(default_factory=dict)

    def packet_generated(self, pid: int, cls: TrafficClass, node: int, now: int) -> None:
        self.generated[cls] += 1
        self.location[pid] = node
        self.pkt_class[pid] = cls

    def packet_accepted(self, pid: int, node: int) -> None:
        if self.location.get(pid) not in (SINK, DROPPED):
            self.location[pid] = node

    def packet_dropped(self, pid: int, node: int, cause: str) -> bool:
        # a sender giving up on a copy its receiver already took is not a loss
        if self.location.get(pid) != node:
            return False
        self.location[pid] = DROPPED
        self.drops[cause] += 1
        return True

    def record_delivery(self, frame, now: int) -> None:
        self.location[frame.pid] = SINK
        self.deliveries.append(Delivery(frame.cls, frame.origin_node, frame.origin_time, now,
                                        frame.pid))

    def log_adaptation(self, now: int, node: int, parameter: str, old, new,
                       trigger_d: Optional[float] = None, trigger_s: Optional[float] = None,
                       u: Optional[float] = None, rho: Optional[float] = None,
                       n_next_hop: Optional[int] = None) -> None:
        self.adaptations.append((now, node, self.scheme, parameter, old, new, trigger_d,
                                 trigger_s, u, rho, n_next_hop))

    def log_ledger(self, now: int, node: int, trx: int, ttx: int, tidle: int, awake: int,
                   dc: float) -> None:
        self.ledger.append((now, node, trx, ttx, tidle, awake, dc))

    @property
    def dropped_total(self) -> int:
        return sum(self.drops.values())

    def in_flight(self) -> int:
        return sum(1 for loc in self.location.values() if loc not in (SINK, DROPPED))


@dataclass
class ClassSummary:
    cls: TrafficClass
    generated: int
    delivered: int
    delays: list
    average: Optional[float]

    @property
    def cumulative(self) -> list:
        out, acc = [], 0
        for d in self.delays:
            acc += d
            out.append(acc)
        return out


@dataclass
class Summary:
    scheme: str
    classes: dict
    drops: dict
    generated: int
    delivered: int
    in_flight: int

    def average(self, cls: TrafficClass) -> Optional[float]:
        return self.classes[cls].average


def finalize(metrics: MetricsLog) -> Summary:
    classes = {}
    for cls in TrafficClass:
        delays = [d.delay for d in metrics.deliveries if d.cls is cls]
        classes[cls] = ClassSummary(cls, metrics.generated[cls], len(delays), delays,
                                    fmean(delays) if delays else None)
    return Summary(metrics.scheme, classes, dict(metrics.drops), sum(metrics.generated.values()),
                   len(metrics.deliveries), metrics.in_flight())
