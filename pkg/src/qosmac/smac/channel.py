from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional


@dataclass
class ChannelModel:
    """Unit-disk radio: a link exists iff two nodes are within ``comm_range``.

    Propagation is instantaneous; overlapping receptions at one node destroy
    every frame involved (no capture).  Carrier sensing reaches ``cs_range``
    (at least ``comm_range``): farther transmissions keep the medium busy
    but can neither be decoded nor corrupt a reception.
    """

    positions: dict[int, tuple[float, float]]
    comm_range: float
    bitrate: float = 20_000.0
    slot_time: int = 20
    cs_range: Optional[float] = None
    neighbors: dict[int, list[int]] = field(init=False)
    sensed: dict[int, list[int]] = field(init=False)

    def __post_init__(self):
        if self.cs_range is None or self.cs_range < self.comm_range:
            self.cs_range = self.comm_range
        ids = sorted(self.positions)
        self.neighbors = {
            u: [v for v in ids if v != u and self.distance(u, v) <= self.comm_range] for u in ids
        }
        self.sensed = {
            u: [v for v in ids if v != u and self.distance(u, v) <= self.cs_range] for u in ids
        }

    def distance(self, u: int, v: int) -> float:
        (x1, y1), (x2, y2) = self.positions[u], self.positions[v]
        return math.hypot(x1 - x2, y1 - y2)

    def linked(self, u: int, v: int) -> bool:
        return v in self.neighbors[u]

    def airtime(self, bits: int) -> int:
        """Transmission time in ticks, rounded up."""
        return -(-int(bits) * 1_000_000 // int(self.bitrate))
