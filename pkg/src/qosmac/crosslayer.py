"""Cross-layer mechanisms: next-hop declarations in SYNC and DSS-aware link costs."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional

from .qos import EwmaEstimator

NO_ROUTE = -1


class NextHopStats:
    """Distinct neighbours that declared this node as their next hop in the current window."""

    def __init__(self, node_id: int, n_min: int = 2):
        self.node_id = node_id
        self.n_min = n_min
        self.declarers: set[int] = set()

    def observe(self, src: int, next_hop_field: int) -> None:
        if next_hop_field == NO_ROUTE:
            return
        if next_hop_field == self.node_id:
            self.declarers.add(src)

    @property
    def count(self) -> int:
        return len(self.declarers)

    def reset(self) -> int:
        n = len(self.declarers)
        self.declarers = set()
        return n


def piggyback_next_hop(routes: "RoutingTable", node_id: int) -> int:
    return routes.next_hop.get(node_id, NO_ROUTE)


@dataclass
class LinkCostState:
    beta: float = 0.5
    lc_ori: float = 1.0
    s_target: float = 150_000.0
    links: dict = field(default_factory=dict)

    def estimator(self, src: int, dst: int) -> EwmaEstimator:
        est = self.links.get((src, dst))
        if est is None:
            est = self.links[(src, dst)] = EwmaEstimator(self.beta)
        return est

    def average(self, src: int, dst: int) -> Optional[float]:
        est = self.links.get((src, dst))
        return est.value if est is not None else None


def update_link_dss(state: LinkCostState, src: int, dst: int, sample: float) -> float:
    return state.estimator(src, dst).update(sample)


def link_cost(avg: Optional[float], s_target: float, lc_ori: float = 1.0) -> float:
    """Base cost inflated by the relative excess of the link's DSS delay over target."""
    if s_target <= 0:
        raise ValueError("DSS delay target must be positive")
    if avg is None or not avg > s_target:
        return lc_ori
    return lc_ori * (1.0 + (avg - s_target) / s_target)


def overall_link_cost(state: LinkCostState, src: int, dst: int) -> float:
    return link_cost(state.average(src, dst), state.s_target, state.lc_ori)


@dataclass
class RoutingTable:
    sink: int
    next_hop: dict[int, int] = field(default_factory=dict)
    mode: str = "static"
    cost: dict[int, float] = field(default_factory=dict)
    unreachable: set[int] = field(default_factory=set)

    def path(self, node: int) -> list[int]:
        out = [node]
        limit = len(self.next_hop) + 2
        while out[-1] != self.sink:
            nxt = self.next_hop.get(out[-1], NO_ROUTE)
            if nxt == NO_ROUTE or len(out) > limit:
                raise ValueError(f"no loop-free route from {node}")
            out.append(nxt)
        return out


EPS = 1e-9


def shortest_routes(nodes: Iterable[int], adjacency: Mapping[int, Iterable[int]], sink: int,
                    cost: Callable[[int, int], float]) -> RoutingTable:
    """Least-cost next hop from every node to ``sink``.

    ``cost(u, v)`` is the cost of the directed link u -> v.  Among equal-cost
    choices the lowest next-hop id wins.
    """
    nodes = sorted(nodes)
    dist = {n: float("inf") for n in nodes}
    dist[sink] = 0.0
    heap = [(0.0, sink)]
    done = set()
    while heap:
        d, v = heapq.heappop(heap)
        if v in done:
            continue
        done.add(v)
        for u in adjacency.get(v, ()):
            if u in done:
                continue
            nd = d + cost(u, v)
            if nd < dist[u] - EPS:
                dist[u] = nd
                heapq.heappush(heap, (nd, u))
    table = RoutingTable(sink=sink, mode="dss-aware")
    for u in nodes:
        if u == sink:
            continue
        if dist[u] == float("inf"):
            table.unreachable.add(u)
            continue
        best = None
        for v in sorted(adjacency.get(u, ())):
            if dist[v] == float("inf"):
                continue
            c = cost(u, v) + dist[v]
            if abs(c - dist[u]) <= EPS * max(1.0, dist[u]) and dist[v] < dist[u]:
                best = v
                break
        table.next_hop[u] = best if best is not None else NO_ROUTE
        table.cost[u] = dist[u]
    table.cost[sink] = 0.0
    return table


def recompute_routes(mode: str, static: RoutingTable, nodes: Iterable[int],
                     adjacency: Mapping[int, Iterable[int]], links: Optional[LinkCostState] = None
                     ) -> RoutingTable:
    if mode == "static":
        return static
    if mode != "dss-aware":
        raise ValueError(f"unknown routing mode {mode!r}")
    if links is None:
        raise ValueError("dss-aware routing needs link state")
    return shortest_routes(nodes, adjacency, static.sink,
                           lambda u, v: overall_link_cost(links, u, v))
