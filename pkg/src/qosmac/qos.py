"""Per-class QoS adaptation: delay estimators, contention window, duty cycle, DIFS.

Each adaptation is a small pure step so it can be driven by the MAC at the
right trigger point (class-I delivery for the contention window, SYNC
broadcast for the duty cycle) and checked in isolation.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional


class TrafficClass(enum.IntEnum):
    I = 1
    II = 2

    @property
    def label(self) -> str:
        return self.name


class Scheme(enum.Enum):
    BASELINE = "baseline"
    CW = "cw"
    DC = "dc"
    DIFS = "difs"
    ALL = "all"
    XL_NEXTHOP = "xl-nexthop"
    XL_ROUTE = "xl-route"

    @classmethod
    def parse(cls, text: str) -> "Scheme":
        key = text.strip().lower().replace("_", "-")
        for s in cls:
            if s.value == key:
                return s
        raise ValueError(f"unknown scheme {text!r}")


class EwmaEstimator:
    """Exponentially weighted average: ``avg = (1 - w) * sample + w * avg``.

    ``smoothing`` is the weight kept on the previous average.  The first
    sample initializes the average directly.
    """

    __slots__ = ("smoothing", "avg", "initialized", "count", "lo", "hi")

    def __init__(self, smoothing: float):
        if not 0.0 <= smoothing < 1.0:
            raise ValueError(f"smoothing must be in [0, 1), got {smoothing}")
        self.smoothing = smoothing
        self.avg = 0.0
        self.initialized = False
        self.count = 0
        self.lo = math.inf
        self.hi = -math.inf

    def update(self, sample: float) -> float:
        if sample < 0:
            raise ValueError(f"negative delay sample {sample}")
        if not self.initialized:
            self.avg = float(sample)
            self.initialized = True
        else:
            self.avg = (1.0 - self.smoothing) * sample + self.smoothing * self.avg
        self.count += 1
        self.lo = min(self.lo, sample)
        self.hi = max(self.hi, sample)
        return self.avg

    @property
    def value(self) -> Optional[float]:
        return self.avg if self.initialized else None


def update_mac_delay(est: EwmaEstimator, sample: float) -> float:
    return est.update(sample)


def update_dss_delay(est: EwmaEstimator, sample: float) -> float:
    return est.update(sample)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass
class CwPolicy:
    cw1_min: int = 7
    cw1_max_default: int = 15
    cw1_max_max: int = 31
    cw2_min_default: int = 32
    cw2_max_default: int = 63
    cw2_max_max: int = 63
    alpha: float = 0.1
    cw_thresh: int = 1
    d_target: float = 50_000.0  # ticks
    cw1_max: int = field(default=-1)
    cw2_min: int = field(default=-1)

    def __post_init__(self):
        if self.cw1_max < 0:
            self.cw1_max = self.cw1_max_default
        if self.cw2_min < 0:
            self.cw2_min = self.cw2_min_default

    def range_for(self, cls: TrafficClass) -> tuple[int, int]:
        if cls is TrafficClass.I:
            return self.cw1_min, self.cw1_max
        return self.cw2_min, self.cw2_max_default


def cw_class1_step(prev: int, d: float, d_target: float, alpha: float, thresh: int,
                   cw_default: int, cw_max: int) -> int:
    """One contention-window update for delay-sensitive traffic.

    ``d`` is the current MAC-delay average; a delay above target shrinks the
    window (more aggressive access) but never below ``cw_default``; a delay
    below target grows it up to ``cw_max``.
    """
    if d < 1:
        d = 1.0  # below tick resolution
    candidate = round_half_up(prev * (1.0 - alpha * (d - d_target) / d))
    if abs(candidate - prev) < thresh:
        return prev
    if candidate < prev:
        return max(candidate, cw_default)
    if candidate > prev:
        return min(candidate, cw_max)
    return prev


def adapt_cw_class1(pol: CwPolicy, d: float) -> int:
    if pol.d_target <= 0:
        raise ValueError("class-I MAC delay target must be positive")
    pol.cw1_max = cw_class1_step(pol.cw1_max, d, pol.d_target, pol.alpha, pol.cw_thresh,
                                 pol.cw1_max_default, pol.cw1_max_max)
    return pol.cw1_max


def adapt_cw_class2(pol: CwPolicy) -> int:
    # best-effort window starts strictly above the class-I window
    pol.cw2_min = min(max(pol.cw2_min_default, pol.cw1_max + 1), pol.cw2_max_max)
    return pol.cw2_min


def compute_utilization(trx: float, ttx: float, tidle: float) -> float:
    total = trx + ttx + tidle
    if total <= 0:
        return 0.0
    return (trx + ttx) / total


@dataclass
class DutyCyclePolicy:
    dc_default: float = 30.0
    dc_min: float = 30.0
    dc_max: float = 60.0
    dc_thresh: float = 0.05
    u_min: float = 0.10
    rho_min: float = 0.30
    s_target: float = 150_000.0  # ticks
    dc: float = field(default=-1.0)
    dc_prev: float = field(default=-1.0)
    u_prev: float = 0.0

    def __post_init__(self):
        if self.dc < 0:
            self.dc = self.dc_default
        if self.dc_prev < 0:
            self.dc_prev = self.dc


def duty_cycle_step(dc_prev: float, u: float, u_prev: float, s: Optional[float], rho: float,
                    pol: DutyCyclePolicy) -> tuple[float, str]:
    """Utilization- and DSS-delay-driven duty cycle for class-I traffic.

    Returns the new duty cycle and the name of the branch taken.  ``s`` is
    None when no class-I DSS sample has been seen yet; that disables the
    delay-driven part the same way a low class-I share does.
    """
    if u < pol.u_min:
        return pol.dc_default, "low-utilization"
    if not u > pol.u_min:
        return dc_prev, "at-u-min"
    if u_prev > 0:
        dc_u = dc_prev * (1.0 + (u - u_prev) / u_prev)
    else:
        dc_u = pol.dc_max
    dc_u = max(min(dc_u, pol.dc_max), pol.dc_min)
    if not (rho > pol.rho_min and s is not None):
        return dc_prev, "low-class1-share"
    if pol.s_target <= 0:
        raise ValueError("class-I DSS delay target must be positive")
    candidate = dc_prev * (1.0 + (s - pol.s_target) / pol.s_target)
    if abs((candidate - dc_prev) / dc_prev) < pol.dc_thresh:
        return dc_prev, "dead-band"
    if candidate < dc_prev:
        return max(dc_u, pol.dc_min), "decrease"
    if candidate > dc_prev:
        return min(candidate, dc_u), "increase"
    return candidate, "unchanged"


def adapt_duty_cycle(pol: DutyCyclePolicy, s: Optional[float], u: float, rho: float) -> float:
    new, _ = duty_cycle_step(pol.dc, u, pol.u_prev, s, rho, pol)
    pol.dc_prev = pol.dc
    pol.dc = new
    pol.u_prev = u
    return new


def duty_cycle_gated_step(dc_prev: float, u: float, u_prev: float, s: Optional[float], rho: float,
                          n_next_hop: int, n_min: int, pol: DutyCyclePolicy) -> tuple[float, str]:
    """Duty-cycle step that only runs when enough sources route through this node."""
    if u < pol.u_min:
        return pol.dc_default, "low-utilization"
    if n_next_hop > n_min:
        return duty_cycle_step(dc_prev, u, u_prev, s, rho, pol)
    return dc_prev, "gate-closed"


def adapt_duty_cycle_gated(pol: DutyCyclePolicy, s: Optional[float], u: float, rho: float,
                           n_next_hop: int, n_min: int) -> float:
    new, _ = duty_cycle_gated_step(pol.dc, u, pol.u_prev, s, rho, n_next_hop, n_min, pol)
    pol.dc_prev = pol.dc
    pol.dc = new
    pol.u_prev = u
    return new


@dataclass(frozen=True)
class DifsProfile:
    class1_slots: int = 8
    class2_slots: int = 15

    def __post_init__(self):
        if not self.class1_slots < self.class2_slots:
            raise ValueError("class-I DIFS must be shorter than class-II DIFS")

    def slots_for(self, cls: Optional[TrafficClass]) -> int:
        # SYNC (cls None) follows the class-I spacing
        if cls is TrafficClass.II:
            return self.class2_slots
        return self.class1_slots


@dataclass(frozen=True)
class SchemeHooks:
    """Which adaptations a scheme wires into the MAC."""

    scheme: Scheme
    class_cw: bool = False
    cw_adapt: bool = False
    class_difs: bool = False
    dc_mode: Optional[str] = None  # None, "direct" or "gated"
    dss_routing: bool = False

    @property
    def class_queues(self) -> bool:
        """Separate per-class queues and contention only where the MAC differentiates classes."""
        return self.class_cw or self.class_difs

    @property
    def tracks_dss(self) -> bool:
        return self.dc_mode is not None


def apply_scheme(scheme: Scheme) -> SchemeHooks:
    if scheme is Scheme.BASELINE:
        return SchemeHooks(scheme)
    if scheme is Scheme.CW:
        return SchemeHooks(scheme, class_cw=True, cw_adapt=True)
    if scheme is Scheme.DC:
        return SchemeHooks(scheme, dc_mode="direct")
    if scheme is Scheme.DIFS:
        return SchemeHooks(scheme, class_difs=True)
    if scheme is Scheme.ALL:
        return SchemeHooks(scheme, class_cw=True, cw_adapt=True, class_difs=True, dc_mode="direct")
    if scheme is Scheme.XL_NEXTHOP:
        return SchemeHooks(scheme, dc_mode="gated")
    if scheme is Scheme.XL_ROUTE:
        return SchemeHooks(scheme, dss_routing=True)
    raise ValueError(scheme)
