"""Scenario topologies and the plain-text topology file format.

File format, one directive per line (``#`` starts a comment)::

    0 0 0          # id x_m y_m
    1 140 0
    range 200
    sink 0
    route 1 0      # route SRC NEXT_HOP
    schedule 1 0.5 # optional: initial listen phase in seconds
    schedule 2 0.8 fixed  # as above, and never adopt a neighbour's schedule
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .crosslayer import RoutingTable


class TopologyError(ValueError):
    pass


@dataclass
class TopologySpec:
    positions: dict[int, tuple[float, float]]
    comm_range: float
    sink: int
    routes: dict[int, int] = field(default_factory=dict)
    phases: dict[int, float] = field(default_factory=dict)
    name: str = "custom"
    fixed: set[int] = field(default_factory=set)

    @property
    def nodes(self) -> list[int]:
        return sorted(self.positions)

    def adjacency(self) -> dict[int, list[int]]:
        ids = self.nodes
        return {u: [v for v in ids if v != u and self.distance(u, v) <= self.comm_range]
                for u in ids}

    def distance(self, u: int, v: int) -> float:
        (x1, y1), (x2, y2) = self.positions[u], self.positions[v]
        return math.hypot(x1 - x2, y1 - y2)

    def routing_table(self) -> RoutingTable:
        return RoutingTable(sink=self.sink, next_hop=dict(self.routes), mode="static")

    def validate(self) -> None:
        if self.sink not in self.positions:
            raise TopologyError(f"sink {self.sink} is not a node")
        adj = self.adjacency()
        for src, nxt in self.routes.items():
            if src not in self.positions or nxt not in self.positions:
                raise TopologyError(f"route {src}->{nxt} names an unknown node")
            if nxt not in adj[src]:
                raise TopologyError(f"route {src}->{nxt} is not a radio link")
        for n in self.nodes:
            if n == self.sink:
                continue
            seen = {n}
            cur = n
            while cur != self.sink:
                if cur not in self.routes:
                    raise TopologyError(f"node {n} cannot reach the sink (stuck at {cur})")
                cur = self.routes[cur]
                if cur in seen:
                    raise TopologyError(f"routing loop through {cur}")
                seen.add(cur)

    def hops(self, node: int) -> int:
        return len(self.routing_table().path(node)) - 1


def grid(side: int, spacing: float, comm_range: float, name: str) -> TopologySpec:
    """``side x side`` grid, node id = row * side + col, sink 0 in the corner.

    Static routes step toward the sink along the grid lines, reducing the
    larger of the row/column offsets first.
    """
    if side < 2:
        raise TopologyError("grid needs at least 2x2 nodes")
    positions = {}
    routes = {}
    for r in range(side):
        for c in range(side):
            nid = r * side + c
            positions[nid] = (c * spacing, r * spacing)
            if nid == 0:
                continue
            if r >= c:
                routes[nid] = (r - 1) * side + c
            else:
                routes[nid] = r * side + c - 1
    topo = TopologySpec(positions, comm_range, 0, routes, name=name)
    topo.validate()
    return topo


def build_scenario_1(side: int = 3, spacing: float = 140.0, comm_range: float = 200.0) -> TopologySpec:
    return grid(side, spacing, comm_range, "grid1")


def build_scenario_2(side: int = 5, spacing: float = 250.0, comm_range: float = 300.0) -> TopologySpec:
    return grid(side, spacing, comm_range, "grid2")


def parse_topology(text: str, name: str = "file") -> TopologySpec:
    positions: dict[int, tuple[float, float]] = {}
    routes: dict[int, int] = {}
    phases: dict[int, float] = {}
    fixed: set[int] = set()
    comm_range: Optional[float] = None
    sink: Optional[int] = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "range":
                comm_range = float(parts[1])
            elif parts[0] == "sink":
                sink = int(parts[1])
            elif parts[0] == "route":
                routes[int(parts[1])] = int(parts[2])
            elif parts[0] == "schedule":
                phases[int(parts[1])] = float(parts[2])
                if len(parts) > 3:
                    if parts[3] != "fixed":
                        raise ValueError
                    fixed.add(int(parts[1]))
            elif len(parts) == 3:
                positions[int(parts[0])] = (float(parts[1]), float(parts[2]))
            else:
                raise ValueError
        except (ValueError, IndexError):
            raise TopologyError(f"line {lineno}: cannot parse {raw!r}") from None
    if comm_range is None or sink is None:
        raise TopologyError("topology needs 'range' and 'sink' lines")
    topo = TopologySpec(positions, comm_range, sink, routes, phases, name=name, fixed=fixed)
    topo.validate()
    return topo


def load_topology(path: str | Path) -> TopologySpec:
    path = Path(path)
    return parse_topology(path.read_text(), name=path.stem)


def format_topology(topo: TopologySpec) -> str:
    lines = [f"{n} {topo.positions[n][0]:g} {topo.positions[n][1]:g}" for n in topo.nodes]
    lines.append(f"range {topo.comm_range:g}")
    lines.append(f"sink {topo.sink}")
    lines += [f"route {s} {topo.routes[s]}" for s in sorted(topo.routes)]
    lines += [f"schedule {n} {topo.phases[n]:g}" + (" fixed" if n in topo.fixed else "")
              for n in sorted(topo.phases)]
    return "\n".join(lines) + "\n"
