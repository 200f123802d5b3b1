"""Run configuration: flat ``key=value`` text, every key with a default."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable

from .qos import Scheme


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scenario: str = "grid1"
    scheme: str = "baseline"
    seed: int = 1
    duration: float = 500.0
    out: str = "run"
    # scenarios
    grid1_side: int = 3
    grid1_spacing_m: float = 140.0
    grid1_range_m: float = 200.0
    grid2_side: int = 5
    grid2_spacing_m: float = 250.0
    grid2_range_m: float = 300.0
    # traffic
    traffic_period_s: float = 7.0
    grid2_traffic_period_s: float = 30.0
    class2_jitter_s: float = 0.0
    warmup_s: float = 13.0
    # radio / frames
    bitrate_bps: float = 20_000.0
    payload_bytes: int = 100
    header_bytes: int = 10
    ack_bytes: int = 10
    sync_bytes: int = 16
    cs_range_factor: float = 2.2
    slot_us: int = 20
    sifs_us: int = 10
    # S-MAC
    period_s: float = 1.0
    sync_period: int = 10
    boot_spread_s: float = 1.0
    discovery_s: float = 12.0
    retry_limit: int = 5
    queue_capacity: int = 50
    difs_uniform_slots: int = 10
    cw_uniform_min: int = 31
    cw_uniform_max: int = 63
    # contention-window adaptation
    cw1_min: int = 7
    cw1_max: int = 15
    cw1_max_max: int = 31
    cw2_min: int = 32
    cw2_max: int = 63
    cw2_max_max: int = 63
    alpha_cw: float = 0.1
    cw_thresh: int = 1
    d_target_ms: float = 50.0
    eta: float = 0.5
    # duty-cycle adaptation
    dc_default: float = 30.0
    dc_min: float = 30.0
    dc_max: float = 60.0
    dc_thresh: float = 0.05
    u_min: float = 0.10
    rho_min: float = 0.30
    s_target_ms: float = 150.0
    zeta: float = 0.5
    dc_change_repeats: int = 1
    # DIFS per class
    difs1_slots: int = 8
    difs2_slots: int = 15
    # cross layer
    beta: float = 0.5
    lc_ori: float = 1.0
    n_min_next_hop: int = 2

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        try:
            Scheme.parse(self.scheme)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not (self.scenario in ("grid1", "grid2") or self.scenario.startswith("file=")):
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.duration <= 0:
            raise ConfigError("duration must be positive")
        if not 0 < self.dc_min <= self.dc_default <= self.dc_max <= 100:
            raise ConfigError("need 0 < dc_min <= dc_default <= dc_max <= 100")
        if self.s_target_ms <= 0 or self.d_target_ms <= 0:
            raise ConfigError("delay targets must be positive")
        if not self.difs1_slots < self.difs2_slots:
            raise ConfigError("difs1_slots must be below difs2_slots")
        if not self.cw1_max_max < self.cw2_min:
            raise ConfigError("class contention windows overlap")
        if self.cs_range_factor < 1:
            raise ConfigError("cs_range_factor must be at least 1")
        for name in ("eta", "zeta", "beta"):
            if not 0 <= getattr(self, name) < 1:
                raise ConfigError(f"{name} must be in [0, 1)")

    @property
    def scheme_enum(self) -> Scheme:
        return Scheme.parse(self.scheme)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        return "".join(f"{f.name}={getattr(self, f.name)}\n" for f in fields(self))

    def key(self) -> dict:
        """Fields that must agree for two runs to be comparable."""
        skip = {"scheme", "out"}
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name not in skip}


_CASTS = {"int": int, "float": float, "str": str}


def _coerce(name: str, raw: str):
    types = {f.name: f.type for f in fields(RunConfig)}
    if name not in types:
        raise ConfigError(f"unknown config key {name!r}")
    cast = _CASTS[types[name]]
    raw = raw.strip()
    try:
        if cast is int:
            try:
                return int(raw)
            except ValueError:
                v = float(raw)
                if not v.is_integer():
                    raise
                return int(v)
        return cast(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def parse_pairs(pairs: Iterable[str]) -> dict:
    out = {}
    for item in pairs:
        line = item.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {item!r}")
        k, v = line.split("=", 1)
        k = k.strip()
        out[k] = _coerce(k, v.strip())
    return out


def load_config(path: str | Path | None = None, overrides: Iterable[str] = (), **base) -> RunConfig:
    values = dict(base)
    if path is not None:
        values.update(parse_pairs(Path(path).read_text().splitlines()))
    values.update(parse_pairs(overrides))
    return RunConfig(**values)
