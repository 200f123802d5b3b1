"""Per-node S-MAC state machine with per-class contention.

A node is awake during the union of its schedules' listen windows, while it
discovers neighbours at boot, and while it has a frame whose receiver is
listening (a sender waits for the receiver's window; that wait is the DSS
delay).  Each traffic class (and SYNC) runs its own DIFS + backoff countdown;
the first countdown to reach zero wins the channel, ties going to the higher
priority.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

from ..crosslayer import NO_ROUTE, NextHopStats, update_link_dss
from ..kernel import Event
from ..qos import (
    CwPolicy,
    DutyCyclePolicy,
    EwmaEstimator,
    TrafficClass,
    adapt_cw_class1,
    adapt_cw_class2,
    compute_utilization,
    duty_cycle_gated_step,
    duty_cycle_step,
)
from .frames import BROADCAST, Frame, FrameKind, RadioState, Reception, Schedule, ScheduleCopy

if TYPE_CHECKING:
    from ..sim import Simulation

SYNC_KEY = 0
INF = float("inf")


@dataclass
class MacParams:
    period: int = 1_000_000
    slot: int = 20
    sifs: int = 10
    data_bits: int = 880
    ack_bits: int = 80
    sync_bits: int = 128
    sync_period: int = 10
    retry_limit: int = 5
    queue_capacity: int = 50
    difs_uniform: int = 10
    difs1: int = 8
    difs2: int = 15
    cw_uniform_min: int = 31
    cw_uniform_max: int = 63
    eta: float = 0.5
    zeta: float = 0.5
    n_min_next_hop: int = 2
    discovery_until: int = 0
    listen_timeout: int = 1_000_000
    change_repeats: int = 1


class Contender:
    __slots__ = ("key", "cw", "backoff", "t0", "attempts", "sched")

    def __init__(self, key: int):
        self.key = key
        self.cw = -1
        self.backoff: Optional[int] = None
        self.t0: Optional[int] = None
        self.attempts = 0
        self.sched: Optional[Schedule] = None


class Node:
    def __init__(self, sim: "Simulation", node_id: int, rng):
        self.sim = sim
        self.id = node_id
        self.rng = rng
        p = sim.params
        self.p = p
        self.schedules: list[Schedule] = []
        self.neighbor_sched: dict[int, dict[int, ScheduleCopy]] = {}
        self.neighbor_primary: dict[int, int] = {}
        if sim.hooks.class_queues:
            self.queues = {TrafficClass.I: deque(), TrafficClass.II: deque()}
            self.data_keys = (TrafficClass.I, TrafficClass.II)
            self.queue_capacity = p.queue_capacity
        else:
            # class-blind MAC: one FIFO and one contention machine for all data
            shared = deque()
            self.queues = {TrafficClass.I: shared, TrafficClass.II: shared}
            self.data_keys = (TrafficClass.I,)
            self.queue_capacity = 2 * p.queue_capacity
        self.contenders = {k: Contender(k) for k in (SYNC_KEY, TrafficClass.I, TrafficClass.II)}
        self.booted = False
        self.fixed = False
        self.awake = False
        self.transmitting: Optional[Frame] = None
        self.awaiting_ack: Optional[Frame] = None
        self.owes_ack = False
        self.rx: Optional[Reception] = None
        self.busy = 0
        self._fire_ev: Optional[Event] = None
        self._gate_ev: Optional[Event] = None
        self._ack_ev: Optional[Event] = None
        # utilization ledger, reset at each primary SYNC
        self.trx = self.ttx = self.tidle = 0
        self._ledger_t = 0
        self._awake_acc = 0
        self._awake_since = 0
        self.total_awake = 0
        # adaptation state
        hooks = sim.hooks
        self.cw_pol: CwPolicy = sim.make_cw_policy()
        self.dc_pol: DutyCyclePolicy = sim.make_dc_policy()
        self.mac_delay = EwmaEstimator(p.eta)
        self.dss = EwmaEstimator(p.zeta)
        self.rx_counts = {TrafficClass.I: 0, TrafficClass.II: 0}
        self.nexthop = NextHopStats(node_id, p.n_min_next_hop)
        self.last_from: dict[tuple[int, TrafficClass], int] = {}
        self._spread_syncs = False
        self.hooks = hooks
        self.backoff_draws = 0

    # ------------------------------------------------------------------ helpers
    @property
    def kernel(self):
        return self.sim.kernel

    @property
    def radio_state(self) -> RadioState:
        if not self.awake:
            return RadioState.SLEEP
        if self.transmitting is not None:
            return RadioState.TX
        if self.busy > 0:
            return RadioState.RX
        return RadioState.IDLE_LISTEN

    @property
    def duty_cycle(self) -> float:
        return self.dc_pol.dc

    def active_ticks(self, dc: float) -> int:
        return max(1, int(round(self.p.period * dc / 100.0)))

    def primary(self) -> Optional[Schedule]:
        for s in self.schedules:
            if s.is_primary:
                return s
        return None

    def in_window(self) -> bool:
        for s in self.schedules:
            if s.open:
                return True
        return False

    def awake_at(self, t: int) -> bool:
        """Whether ``t`` falls in a listen window of any held schedule."""
        for s in self.schedules:
            start = s.start_of(t)
            if t < start + s.duration_for(start):
                return True
        return False

    def _accrue(self, now: int) -> None:
        dt = now - self._ledger_t
        if dt and self.awake:
            if self.transmitting is not None:
                self.ttx += dt
            elif self.busy > 0:
                self.trx += dt
            else:
                self.tidle += dt
        self._ledger_t = now

    def _set_awake(self, flag: bool, now: int) -> None:
        if flag == self.awake:
            return
        self._accrue(now)
        if flag:
            self._awake_since = now
        else:
            self._awake_acc += now - self._awake_since
            self.total_awake += now - self._awake_since
            self._freeze(now)
            self.rx = None
        self.awake = flag

    def ledger_snapshot(self, now: int) -> tuple[int, int, int, int]:
        self._accrue(now)
        awake = self._awake_acc + (now - self._awake_since if self.awake else 0)
        snap = (self.trx, self.ttx, self.tidle, awake)
        if self.awake:
            self.total_awake += now - self._awake_since
        self.trx = self.ttx = self.tidle = 0
        self._awake_acc = 0
        self._awake_since = now
        return snap

    # ---------------------------------------------------------------- boot/sync
    def boot_explicit(self, phase: int, fixed: bool = False) -> None:
        now = self.kernel.now
        self.booted = True
        self.fixed = fixed
        self._set_awake(True, now)
        self._adopt(phase, primary=True)
        self._evaluate()

    def boot_listen(self, ev: Event = None) -> None:
        now = self.kernel.now
        self.booted = True
        self._set_awake(True, now)
        self.kernel.after(self.p.listen_timeout, self._listen_timeout, self.id, "timer")
        self._evaluate()

    def _listen_timeout(self, ev: Event) -> None:
        if not self.schedules:
            self._adopt(self.kernel.now % self.p.period, primary=True)
        self._evaluate()

    def _adopt(self, phase: int, primary: bool) -> Schedule:
        now = self.kernel.now
        s = Schedule(self.p.period, self.active_ticks(self.dc_pol.dc), phase,
                     sync_periods_left=0, is_primary=primary)
        self.schedules.append(s)
        start = s.start_of(now)
        if now < start + s.active_duration:
            self._open_window(s, start)
        self.kernel.at(start + s.period, self._on_window_start, self.id, "wake", s)
        return s

    def _open_window(self, s: Schedule, start: int) -> None:
        if s.pending_armed and start >= s.pending_at:
            s.apply(start, s.pending_active)
            s.pending_active = None
            s.pending_armed = False
        s.open = True
        s.window_start = start
        s.window_end = start + s.active_duration
        if s.sync_periods_left <= 0:
            s.sync_due = True
        else:
            s.sync_periods_left -= 1
        self.kernel.at(s.window_end, self._on_window_end, self.id, "sleep", s)
        self.sim.on_window(self, s, start)

    def _on_window_start(self, ev: Event) -> None:
        s = ev.data
        now = self.kernel.now
        self._open_window(s, now)
        self.kernel.at(now + s.period, self._on_window_start, self.id, "wake", s)
        self._evaluate()

    def _on_window_end(self, ev: Event) -> None:
        s = ev.data
        if s.window_end == self.kernel.now:
            s.open = False
        self._evaluate()

    def handle_sync(self, f: Frame) -> None:
        now = self.kernel.now
        start = now - (now - f.phase) % self.p.period
        switch = f.switch_at if f.switch_at else start + self.p.period
        copies = self.neighbor_sched.setdefault(f.src, {})
        copies[f.phase] = ScheduleCopy(self.p.period, f.phase, f.active_duration,
                                       f.next_active_duration, switch, now)
        if f.is_primary:
            self.neighbor_primary[f.src] = f.phase
        self.nexthop.observe(f.src, f.next_hop_field)
        if self.fixed:
            return
        if not self.schedules:
            self._adopt(f.phase, primary=True)
        elif f.is_primary and all(s.phase != f.phase for s in self.schedules):
            self._adopt(f.phase, primary=False)

    # ------------------------------------------------------------------ traffic
    def enqueue(self, frame: Frame) -> bool:
        q = self.queues[frame.cls]
        if len(q) >= self.queue_capacity:
            self.sim.metrics.packet_dropped(frame.pid, self.id, "queue_overflow")
            return False
        q.append(frame)
        self._evaluate()
        return True

    def enqueue_app_packet(self, cls: TrafficClass, pid: int, now: int) -> bool:
        f = Frame(FrameKind.DATA, self.id, NO_ROUTE, cls, pid=pid, origin_node=self.id,
                  origin_time=now, enqueue_time=now, payload_bits=self.p.data_bits)
        self.sim.metrics.packet_generated(pid, cls, self.id, now)
        return self.enqueue(f)

    # --------------------------------------------------------------- contention
    def data_key(self, cls: TrafficClass) -> TrafficClass:
        return cls if len(self.data_keys) == 2 else TrafficClass.I

    def _cw_range(self, key) -> tuple[int, int]:
        if self.hooks.class_cw:
            if key == SYNC_KEY:
                return 0, self.cw_pol.cw1_min
            return self.cw_pol.range_for(key)
        if key == SYNC_KEY:
            return 0, self.p.cw_uniform_min
        return self.p.cw_uniform_min, self.p.cw_uniform_max

    def _difs(self, key) -> int:
        if self.hooks.class_difs:
            return self.p.difs2 if key == TrafficClass.II else self.p.difs1
        return self.p.difs_uniform

    def _draw(self, c: Contender) -> int:
        lo, hi = self._cw_range(c.key)
        if c.key == SYNC_KEY:
            c.cw = hi
        elif c.cw < lo:
            c.cw = lo
        elif c.cw > hi:
            c.cw = hi
        b = self.rng.uniform_int(0, c.cw)
        self.backoff_draws += 1
        mon = self.sim.monitor
        if mon is not None:
            mon.check_backoff(self, c, b, lo, hi)
        return b

    def _fail_cw(self, c: Contender) -> None:
        lo, hi = self._cw_range(c.key)
        c.cw = min(2 * max(c.cw, lo) + 1, hi)
        c.backoff = self._draw(c)

    def _reset(self, c: Contender) -> None:
        lo, _ = self._cw_range(c.key)
        c.cw = lo
        c.backoff = None
        c.t0 = None
        c.attempts = 0
        c.sched = None

    def _freeze(self, now: int) -> None:
        slot = self.p.slot
        for c in self.contenders.values():
            if c.t0 is not None:
                elapsed = now - c.t0 - self._difs(c.key) * slot
                if elapsed > 0 and c.backoff:
                    c.backoff = max(0, c.backoff - elapsed // slot)
                c.t0 = None
        if self._fire_ev is not None:
            self._fire_ev.cancel()
            self._fire_ev = None

    def next_hop(self) -> int:
        return self.sim.routes.next_hop.get(self.id, NO_ROUTE)

    def receiver_window(self, r: int, now: int) -> tuple[bool, Optional[int]]:
        """(listening now, time the answer changes) for neighbour ``r``."""
        copies = self.neighbor_sched.get(r)
        if not copies:
            return False, None
        end = None
        nxt = INF
        for c in copies.values():
            w = c.window_at(now)
            if w is not None:
                if end is None or w[1] > end:
                    end = w[1]
            else:
                nxt = min(nxt, c.next_start(now))
        if end is not None:
            return True, end
        return False, int(nxt)

    def _sync_schedule(self, now: int) -> Optional[Schedule]:
        for s in self.schedules:
            if s.sync_due and s.open and now < s.window_end:
                return s
        return None

    def _evaluate(self) -> None:
        if not self.booted:
            return
        now = self.kernel.now
        gate_at = INF
        sync_s = self._sync_schedule(now)
        eligible = {}
        if sync_s is not None:
            eligible[SYNC_KEY] = sync_s
            gate_at = sync_s.window_end
        if self.queues[TrafficClass.I] or self.queues[TrafficClass.II]:
            r = self.next_hop()
            if r != NO_ROUTE:
                open_, change = self.receiver_window(r, now)
                if change is not None:
                    gate_at = min(gate_at, change)
                if open_:
                    for cls in self.data_keys:
                        if self.queues[cls]:
                            eligible[cls] = r
        busy_op = (self.transmitting is not None or self.awaiting_ack is not None
                   or self.owes_ack or self.rx is not None)
        want = bool(eligible) or busy_op or self.in_window() or now < self.p.discovery_until
        self._set_awake(want, now)
        can_count = self.awake and not busy_op and self.busy == 0
        slot = self.p.slot
        best = None
        for key, c in self.contenders.items():
            if key in eligible and can_count:
                if c.t0 is None:
                    if c.backoff is None:
                        if c.cw < 0:
                            self._reset(c)
                        c.backoff = self._draw(c)
                    c.t0 = now
                    if key != SYNC_KEY:
                        head = self.queues[key][0]
                        if head.carrier_sense_start is None:
                            head.carrier_sense_start = now
                fire = c.t0 + (self._difs(key) + c.backoff) * slot
                if best is None or fire < best:
                    best = fire
            elif c.t0 is not None:
                elapsed = now - c.t0 - self._difs(key) * slot
                if elapsed > 0 and c.backoff:
                    c.backoff = max(0, c.backoff - elapsed // slot)
                c.t0 = None
        fe = self._fire_ev
        if best is None:
            if fe is not None:
                fe.cancel()
                self._fire_ev = None
        elif fe is None or fe.fire_at != best:
            if fe is not None:
                fe.cancel()
            self._fire_ev = self.kernel.at(best, self._on_fire, self.id, "timer")
        ge = self._gate_ev
        if gate_at == INF:
            if ge is not None:
                ge.cancel()
                self._gate_ev = None
        elif ge is None or ge.fire_at != gate_at:
            if ge is not None:
                ge.cancel()
            self._gate_ev = self.kernel.at(int(gate_at), self._on_gate, self.id, "timer")

    def _on_gate(self, ev: Event) -> None:
        self._gate_ev = None
        self._evaluate()

    def _on_fire(self, ev: Event) -> None:
        self._fire_ev = None
        now = self.kernel.now
        slot = self.p.slot
        winner = None
        losers = []
        for key, c in self.contenders.items():
            if c.t0 is None:
                continue
            if c.t0 + (self._difs(key) + c.backoff) * slot == now:
                if winner is None:
                    winner = key
                else:
                    losers.append(key)
        if winner is None or self.transmitting is not None or self.awaiting_ack is not None:
            self._evaluate()
            return
        # the gate may have closed at this same tick
        if winner == SYNC_KEY:
            sched = self._sync_schedule(now)
            if sched is None:
                self._evaluate()
                return
        else:
            r = self.next_hop()
            if r == NO_ROUTE or not self.receiver_window(r, now)[0]:
                self._evaluate()
                return
        self._freeze(now)
        for key in losers:
            # internal collision: the lower class backs off as if it had collided
            self._fail_cw(self.contenders[key])
        c = self.contenders[winner]
        c.backoff = 0
        if winner == SYNC_KEY:
            self._send_sync(sched, now)
        else:
            self._send_data(winner, now)

    # ------------------------------------------------------------- transmission
    def _start_tx(self, frame: Frame, bits: int) -> None:
        self.sim.start_tx(self, frame, self.sim.channel.airtime(bits))

    def _send_data(self, cls: TrafficClass, now: int) -> None:
        head = self.queues[cls][0]
        head.dst = self.next_hop()
        head.src = self.id
        head.tx_start_time = now
        head.dss_delay_field = head.dss_sample()
        self.contenders[cls].attempts += 1
        self._start_tx(head, head.payload_bits)

    def _send_sync(self, sched: Schedule, now: int) -> None:
        repeat = sched.repeats_left > 0
        if sched.is_primary and not repeat:
            self.sim.on_primary_sync(self, now)
        start = sched.window_start
        if sched.pending_active is not None and not sched.pending_armed:
            # switch after the last repeat, so any one announcement carries the right time
            sched.pending_armed = True
            sched.pending_at = start + (1 + self.p.change_repeats) * sched.period
        if sched.pending_armed:
            nxt, switch = sched.pending_active, sched.pending_at
        else:
            nxt, switch = sched.active_duration, start + sched.period
        f = Frame(FrameKind.SYNC, self.id, BROADCAST, phase=sched.phase,
                  active_duration=sched.active_duration, next_active_duration=nxt,
                  next_sleep_at=start + sched.active_duration, switch_at=switch,
                  duty_cycle=self.dc_pol.dc,
                  is_primary=sched.is_primary, next_hop_field=self.next_hop(),
                  tx_start_time=now)
        sched.sync_due = False
        if repeat:
            # re-announce a duty-cycle change next cycle, then resume the regular round
            sched.repeats_left -= 1
            sched.sync_periods_left = 0 if sched.repeats_left else sched.resume_after
        elif sched.repeats_left < 0:
            sched.repeats_left = -sched.repeats_left
            sched.resume_after = self.p.sync_period - 2
            sched.sync_periods_left = 0
        elif now < self.p.discovery_until:
            # announce every cycle while the neighbourhood is still forming
            sched.sync_periods_left = 0
            self._spread_syncs = True
        elif self._spread_syncs:
            # leaving discovery: desynchronize SYNC rounds across the cluster
            sched.sync_periods_left = self.rng.uniform_int(0, self.p.sync_period - 1)
            self._spread_syncs = False
        else:
            sched.sync_periods_left = self.p.sync_period - 1
        self._start_tx(f, self.p.sync_bits)

    def send_ack(self, ev: Event) -> None:
        data = ev.data
        ack = Frame(FrameKind.ACK, self.id, data.src, data.cls, pid=data.pid)
        self._start_tx(ack, self.p.ack_bits)

    def begin_tx(self, frame: Frame, now: int) -> None:
        self._accrue(now)
        self.transmitting = frame
        self.rx = None
        self._freeze(now)

    def end_tx(self, frame: Frame, now: int) -> None:
        self._accrue(now)
        self.transmitting = None
        if frame.kind is FrameKind.DATA:
            self.awaiting_ack = frame
            timeout = self.p.sifs + self.sim.channel.airtime(self.p.ack_bits) + 2 * self.p.slot
            self._ack_ev = self.kernel.after(timeout, self._ack_timeout, self.id, "timer", frame)
        elif frame.kind is FrameKind.SYNC:
            self._reset(self.contenders[SYNC_KEY])
        else:
            self.owes_ack = False
        self._evaluate()

    def _ack_timeout(self, ev: Event) -> None:
        f = ev.data
        self._ack_ev = None
        if self.awaiting_ack is not f:
            return
        self.awaiting_ack = None
        c = self.contenders[self.data_key(f.cls)]
        if c.attempts >= self.p.retry_limit:
            self.queues[f.cls].popleft()
            self.sim.metrics.packet_dropped(f.pid, self.id, "retry_limit")
            self._reset(c)
        else:
            self._fail_cw(c)
        self._evaluate()

    def _ack_received(self, ack: Frame) -> None:
        f = self.awaiting_ack
        if f is None or ack.pid != f.pid:
            return
        if self._ack_ev is not None:
            self._ack_ev.cancel()
            self._ack_ev = None
        self.awaiting_ack = None
        now = self.kernel.now
        self.queues[f.cls].popleft()
        self._reset(self.contenders[self.data_key(f.cls)])
        self.sim.on_data_delivered(self, f, now)
        self._evaluate()

    # ---------------------------------------------------------------- reception
    def on_medium_busy(self, now: int) -> None:
        fe = self._fire_ev
        if fe is not None and fe.fire_at == now:
            # decided to transmit in this same slot: collide rather than defer
            return
        self._freeze(now)

    def on_frame_rx(self, f: Frame) -> None:
        now = self.kernel.now
        if f.kind is FrameKind.SYNC:
            self.handle_sync(f)
        elif f.kind is FrameKind.ACK:
            if f.dst == self.id:
                self._ack_received(f)
        elif f.dst == self.id:
            self.owes_ack = True
            self.kernel.after(self.p.sifs, self.send_ack, self.id, "timer", f)
            if self.last_from.get((f.src, f.cls)) == f.pid:
                return
            self.last_from[(f.src, f.cls)] = f.pid
            self.rx_counts[f.cls] += 1
            if self.hooks.tracks_dss and f.cls is TrafficClass.I:
                self.dss.update(f.dss_delay_field)
                if self.sim.monitor is not None:
                    self.sim.monitor.check_ewma(self, "dss", self.dss)
            self.sim.metrics.packet_accepted(f.pid, self.id)
            if self.id == self.sim.sink:
                self.sim.metrics.record_delivery(f, now)
            else:
                fwd = Frame(FrameKind.DATA, self.id, NO_ROUTE, f.cls, pid=f.pid,
                            origin_node=f.origin_node, origin_time=f.origin_time,
                            enqueue_time=now, payload_bits=f.payload_bits)
                self.enqueue(fwd)

    # ------------------------------------------------------------ adaptations
    def run_cw_adaptation(self, f: Frame, now: int) -> None:
        sample = f.tx_start_time - f.enqueue_time
        d = self.mac_delay.update(sample)
        mon = self.sim.monitor
        if mon is not None:
            mon.check_ewma(self, "mac", self.mac_delay)
        old1, old2 = self.cw_pol.cw1_max, self.cw_pol.cw2_min
        new1 = adapt_cw_class1(self.cw_pol, d)
        new2 = adapt_cw_class2(self.cw_pol)
        log = self.sim.metrics.log_adaptation
        log(now, self.id, "cw1_max", old1, new1, trigger_d=d)
        if new2 != old2:
            log(now, self.id, "cw2_min", old2, new2, trigger_d=d)
        if mon is not None:
            mon.check_cw(self)

    def run_dc_adaptation(self, u: float, rho: float, n_next: int, now: int) -> None:
        pol = self.dc_pol
        old = pol.dc
        s = self.dss.value
        if self.hooks.dc_mode == "gated":
            new, branch = duty_cycle_gated_step(old, u, pol.u_prev, s, rho, n_next,
                                                self.p.n_min_next_hop, pol)
        else:
            new, branch = duty_cycle_step(old, u, pol.u_prev, s, rho, pol)
        pol.dc_prev = old
        pol.dc = new
        pol.u_prev = u
        self.sim.metrics.log_adaptation(now, self.id, "duty_cycle", old, new, trigger_s=s,
                                        u=u, rho=rho, n_next_hop=n_next)
        if self.sim.monitor is not None:
            self.sim.monitor.check_dc(self, u, new)
        if new != old:
            ticks = self.active_ticks(new)
            for s_ in self.schedules:
                s_.pending_active = ticks
                s_.pending_armed = False
                s_.repeats_left = -self.p.change_repeats
                if not s_.is_primary:
                    s_.sync_periods_left = 0
