"""Simulation driver: wires topology, channel, nodes, traffic and adaptations together."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

from .config import RunConfig
from .crosslayer import LinkCostState, RoutingTable, overall_link_cost, recompute_routes, update_link_dss
from .kernel import Kernel, RngStream, ms, seconds
from .metrics import MetricsLog, Summary, finalize
from .qos import CwPolicy, DutyCyclePolicy, TrafficClass, apply_scheme, compute_utilization
from .smac.channel import ChannelModel
from .smac.frames import Frame, Reception, Schedule
from .smac.node import MacParams, Node
from .topology import TopologySpec, build_scenario_1, build_scenario_2, load_topology

log = logging.getLogger(__name__)

# stream ids per node: node_id * STRIDE + offset
STRIDE = 8
MAC_STREAM, TRAFFIC_I_STREAM, TRAFFIC_II_STREAM, BOOT_STREAM = 1, 2, 3, 4


class InvariantViolation(AssertionError):
    pass


class InvariantMonitor:
    """Collects invariant breaches seen while a run executes.

    With ``strict`` set the first breach raises instead.
    """

    def __init__(self, strict: bool = False):
        self.strict = strict
        self.violations: list[str] = []
        self.checks = 0
        self.sync_checks = 0
        self.sync_mismatches: list[tuple] = []

    def fail(self, msg: str) -> None:
        self.violations.append(msg)
        if self.strict:
            raise InvariantViolation(msg)

    def check_backoff(self, node, c, b, lo, hi) -> None:
        self.checks += 1
        if not 0 <= b <= c.cw:
            self.fail(f"node {node.id} key {c.key}: backoff {b} outside [0, {c.cw}]")
        if c.key != 0 and not lo <= c.cw <= hi:
            self.fail(f"node {node.id} class {c.key}: cw {c.cw} outside [{lo}, {hi}]")

    def check_ewma(self, node, name, est) -> None:
        self.checks += 1
        v = est.value
        if v is None or not est.lo - 1e-6 <= v <= est.hi + 1e-6:
            self.fail(f"node {node.id} {name} average {v} outside sample range [{est.lo}, {est.hi}]")

    def check_cw(self, node) -> None:
        self.checks += 1
        p = node.cw_pol
        if not p.cw1_max_default <= p.cw1_max <= p.cw1_max_max:
            self.fail(f"node {node.id}: class-I CWmax {p.cw1_max} out of bounds")
        if not p.cw2_min > p.cw1_max:
            self.fail(f"node {node.id}: class windows overlap ({p.cw1_max} >= {p.cw2_min})")

    def check_dc(self, node, u, dc) -> None:
        self.checks += 1
        p = node.dc_pol
        if not p.dc_min <= dc <= p.dc_max:
            self.fail(f"node {node.id}: duty cycle {dc} outside [{p.dc_min}, {p.dc_max}]")
        if u < p.u_min and dc != p.dc_default:
            self.fail(f"node {node.id}: low utilization {u} but duty cycle {dc}")

    def check_ledger(self, node, trx, ttx, tidle, awake) -> None:
        self.checks += 1
        if trx + ttx + tidle != awake:
            self.fail(f"node {node.id}: ledger {trx}+{ttx}+{tidle} != awake {awake}")

    def check_conservation(self, metrics: MetricsLog) -> None:
        self.checks += 1
        gen = sum(metrics.generated.values())
        accounted = len(metrics.deliveries) + metrics.dropped_total + metrics.in_flight()
        if gen != accounted:
            self.fail(f"packet conservation: generated {gen} != accounted {accounted}")

    def check_sync(self, owner: Node, sched: Schedule, start: int, holder: Node, copy) -> None:
        self.sync_checks += 1
        w = copy.window_at(start)
        expected = (start, start + sched.active_duration)
        if w is None or abs(w[0] - expected[0]) > 1 or abs(w[1] - expected[1]) > 1:
            self.sync_mismatches.append((start, owner.id, holder.id, expected, w))


@dataclass
class SimResult:
    config: RunConfig
    topology: TopologySpec
    metrics: MetricsLog
    summary: Summary
    monitor: InvariantMonitor
    events: int
    nodes: dict = field(repr=False, default_factory=dict)

    @property
    def violations(self) -> list[str]:
        return self.monitor.violations

    @property
    def delivered(self) -> int:
        return self.summary.delivered

    def average(self, cls: TrafficClass) -> Optional[float]:
        return self.summary.average(cls)

    @property
    def delays(self) -> dict:
        return {cls: c.delays for cls, c in self.summary.classes.items()}

    @property
    def scheme(self) -> str:
        return self.config.scheme


def resolve_topology(cfg: RunConfig) -> TopologySpec:
    if cfg.scenario == "grid1":
        return build_scenario_1(cfg.grid1_side, cfg.grid1_spacing_m, cfg.grid1_range_m)
    if cfg.scenario == "grid2":
        return build_scenario_2(cfg.grid2_side, cfg.grid2_spacing_m, cfg.grid2_range_m)
    return load_topology(cfg.scenario[len("file="):])


def mac_params(cfg: RunConfig) -> MacParams:
    period = seconds(cfg.period_s)
    return MacParams(
        period=period, slot=cfg.slot_us, sifs=cfg.sifs_us,
        data_bits=8 * (cfg.payload_bytes + cfg.header_bytes), ack_bits=8 * cfg.ack_bytes,
        sync_bits=8 * cfg.sync_bytes, sync_period=cfg.sync_period, retry_limit=cfg.retry_limit,
        queue_capacity=cfg.queue_capacity, difs_uniform=cfg.difs_uniform_slots,
        difs1=cfg.difs1_slots, difs2=cfg.difs2_slots, cw_uniform_min=cfg.cw_uniform_min,
        cw_uniform_max=cfg.cw_uniform_max, eta=cfg.eta, zeta=cfg.zeta,
        n_min_next_hop=cfg.n_min_next_hop, discovery_until=seconds(cfg.discovery_s),
        listen_timeout=period, change_repeats=cfg.dc_change_repeats)


class Simulation:
    def __init__(self, cfg: RunConfig, topology: Optional[TopologySpec] = None,
                 strict: bool = False, trace: bool = False):
        self.cfg = cfg
        self.topology = topology if topology is not None else resolve_topology(cfg)
        self.topology.validate()
        self.params = mac_params(cfg)
        self.hooks = apply_scheme(cfg.scheme_enum)
        self.kernel = Kernel(trace=trace)
        self.channel = ChannelModel(self.topology.positions, self.topology.comm_range,
                                    cfg.bitrate_bps, cfg.slot_us,
                                    self.topology.comm_range * cfg.cs_range_factor)
        self.sink = self.topology.sink
        self.static_routes: RoutingTable = self.topology.routing_table()
        self.routes: RoutingTable = self.static_routes
        self.links = LinkCostState(cfg.beta, cfg.lc_ori, ms(cfg.s_target_ms))
        self.metrics = MetricsLog(scheme=self.hooks.scheme.value)
        self.monitor = InvariantMonitor(strict)
        self.nodes: dict[int, Node] = {
            n: Node(self, n, RngStream(cfg.seed, n * STRIDE + MAC_STREAM))
            for n in self.topology.nodes
        }
        self._pid = 0
        self._listeners: dict[int, list] = {}
        self._inrange = {n: 0 for n in self.topology.nodes}

    # ------------------------------------------------------------ factories
    def make_cw_policy(self) -> CwPolicy:
        c = self.cfg
        return CwPolicy(c.cw1_min, c.cw1_max, c.cw1_max_max, c.cw2_min, c.cw2_max, c.cw2_max_max,
                        c.alpha_cw, c.cw_thresh, ms(c.d_target_ms))

    def make_dc_policy(self) -> DutyCyclePolicy:
        c = self.cfg
        return DutyCyclePolicy(c.dc_default, c.dc_min, c.dc_max, c.dc_thresh, c.u_min, c.rho_min,
                               ms(c.s_target_ms))

    # -------------------------------------------------------------- channel
    def start_tx(self, node: Node, frame: Frame, airtime: int) -> None:
        now = self.kernel.now
        node.begin_tx(frame, now)
        heard = []
        linked = self.channel.neighbors[node.id]
        for vid in self.channel.sensed[node.id]:
            v = self.nodes[vid]
            if not v.awake:
                continue
            v._accrue(now)
            v.busy += 1
            decodable = vid in linked
            if decodable:
                self._inrange[vid] += 1
                if v.transmitting is None:
                    if self._inrange[vid] == 1 and v.rx is None:
                        v.rx = Reception(frame)
                    elif v.rx is not None:
                        v.rx.corrupted = True
            heard.append((v, decodable))
            v.on_medium_busy(now)
        self._listeners[id(frame)] = heard
        self.kernel.after(airtime, self._end_tx, node.id, "tx_end", (node, frame))

    def _end_tx(self, ev) -> None:
        node, frame = ev.data
        now = self.kernel.now
        heard = self._listeners.pop(id(frame))
        node.end_tx(frame, now)
        for v, decodable in heard:
            v._accrue(now)
            v.busy -= 1
            if decodable:
                self._inrange[v.id] -= 1
            rx = v.rx
            if rx is not None and rx.frame is frame:
                v.rx = None
                if not rx.corrupted and v.awake:
                    v.on_frame_rx(frame)
            v._evaluate()

    # ------------------------------------------------------------ callbacks
    def on_window(self, node: Node, sched: Schedule, start: int) -> None:
        # audit neighbours that follow this schedule; others sleep through its SYNCs
        for vid in self.channel.neighbors[node.id]:
            v = self.nodes[vid]
            copies = v.neighbor_sched.get(node.id)
            if copies and sched.phase in copies and any(s.phase == sched.phase for s in v.schedules):
                self.monitor.check_sync(node, sched, start, v, copies[sched.phase])

    def on_primary_sync(self, node: Node, now: int) -> None:
        trx, ttx, tidle, awake = node.ledger_snapshot(now)
        self.monitor.check_ledger(node, trx, ttx, tidle, awake)
        u = compute_utilization(trx, ttx, tidle)
        n1, n2 = node.rx_counts[TrafficClass.I], node.rx_counts[TrafficClass.II]
        rho = n1 / (n1 + n2) if n1 + n2 else 0.0
        node.rx_counts = {TrafficClass.I: 0, TrafficClass.II: 0}
        n_next = node.nexthop.reset()
        self.metrics.log_ledger(now, node.id, trx, ttx, tidle, awake, node.duty_cycle)
        if self.hooks.dc_mode is not None:
            node.run_dc_adaptation(u, rho, n_next, now)

    def on_data_delivered(self, node: Node, frame: Frame, now: int) -> None:
        if self.hooks.cw_adapt and frame.cls is TrafficClass.I:
            node.run_cw_adaptation(frame, now)
        if self.hooks.dss_routing:
            update_link_dss(self.links, node.id, frame.dst, frame.dss_delay_field)
            self.monitor.check_ewma(node, f"link {node.id}->{frame.dst}",
                                    self.links.estimator(node.id, frame.dst))

    # -------------------------------------------------------------- traffic
    def _next_pid(self) -> int:
        self._pid += 1
        return self._pid

    def _schedule_traffic(self) -> None:
        cfg = self.cfg
        period_s = cfg.grid2_traffic_period_s if cfg.scenario == "grid2" else cfg.traffic_period_s
        period = seconds(period_s)
        start = seconds(cfg.warmup_s)
        jitter = min(seconds(cfg.class2_jitter_s), period - 1)
        for n in self.topology.nodes:
            if n == self.sink:
                continue
            s1 = RngStream(cfg.seed, n * STRIDE + TRAFFIC_I_STREAM)
            s2 = RngStream(cfg.seed, n * STRIDE + TRAFFIC_II_STREAM)
            self.kernel.at(start + int(s1.expovariate(1.0 / period)), self._class1_arrival, n,
                           "traffic", (s1, period))
            nominal = start + s2.uniform_int(0, period - 1)
            self._emit_class2_at(n, s2, period, jitter, nominal)

    def _emit_class2_at(self, n, s, period, jitter, nominal) -> None:
        # nominal instants stay on the period grid; jitter only shifts each emission
        t = nominal + (s.uniform_int(0, jitter) if jitter > 0 else 0)
        self.kernel.at(t, self._class2_arrival, n, "traffic", (s, period, jitter, nominal))

    def _class1_arrival(self, ev) -> None:
        s, period = ev.data
        now = self.kernel.now
        self.nodes[ev.target].enqueue_app_packet(TrafficClass.I, self._next_pid(), now)
        self.kernel.after(max(1, int(s.expovariate(1.0 / period))), self._class1_arrival,
                          ev.target, "traffic", ev.data)

    def _class2_arrival(self, ev) -> None:
        s, period, jitter, nominal = ev.data
        self.nodes[ev.target].enqueue_app_packet(TrafficClass.II, self._next_pid(), self.kernel.now)
        self._emit_class2_at(ev.target, s, period, jitter, nominal + period)

    # --------------------------------------------------------------- routes
    def _recompute_routes(self, ev) -> None:
        now = self.kernel.now
        table = recompute_routes("dss-aware", self.static_routes, self.topology.nodes,
                                 self.channel.neighbors, self.links)
        for u in self.topology.nodes:
            for v in self.channel.neighbors[u]:
                avg = self.links.average(u, v)
                if avg is not None:
                    self.metrics.routes.append((now, u, v, avg, overall_link_cost(self.links, u, v),
                                                table.next_hop.get(u) == v))
        for u, nxt in table.next_hop.items():
            if self.routes.next_hop.get(u) != nxt:
                self.metrics.log_adaptation(now, u, "next_hop", self.routes.next_hop.get(u), nxt)
        self.routes = table
        self.kernel.after(self.params.period * self.params.sync_period, self._recompute_routes,
                          None, "routes")
        for node in self.nodes.values():
            node._evaluate()

    # ------------------------------------------------------------------ run
    def _boot(self) -> None:
        cfg = self.cfg
        spread = seconds(cfg.boot_spread_s)
        for n, node in self.nodes.items():
            if n in self.topology.phases:
                node.boot_explicit(seconds(self.topology.phases[n]) % self.params.period,
                                   fixed=n in self.topology.fixed)
            else:
                t = RngStream(cfg.seed, n * STRIDE + BOOT_STREAM).uniform_int(0, max(0, spread - 1))
                self.kernel.at(t, node.boot_listen, n, "boot")

    def run(self) -> SimResult:
        cfg = self.cfg
        if self.hooks.class_difs:
            for n in self.topology.nodes:
                self.metrics.log_adaptation(0, n, "difs_class1", cfg.difs_uniform_slots, cfg.difs1_slots)
                self.metrics.log_adaptation(0, n, "difs_class2", cfg.difs_uniform_slots, cfg.difs2_slots)
        self._boot()
        self._schedule_traffic()
        if self.hooks.dss_routing:
            self.kernel.at(seconds(cfg.warmup_s), self._recompute_routes, None, "routes")
        events = self.kernel.run_until(seconds(cfg.duration))
        self.monitor.check_conservation(self.metrics)
        summary = finalize(self.metrics)
        return SimResult(cfg, self.topology, self.metrics, summary, self.monitor, events, self.nodes)


def run_simulation(cfg: RunConfig, topology: Optional[TopologySpec] = None,
                   strict: bool = False) -> SimResult:
    return Simulation(cfg, topology, strict=strict).run()
