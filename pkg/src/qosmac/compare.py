"""Per-class delay comparison of a baseline run against an adapted run."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .qos import TrafficClass

PARITY_TOLERANCE = 0.02


class ComparisonError(ValueError):
    """The two runs were not configured identically apart from the scheme."""


def improvement(base: Optional[float], adapted: Optional[float]) -> Optional[float]:
    """Percent reduction of ``adapted`` relative to ``base``; None when undefined."""
    if base is None or adapted is None or base == 0:
        return None
    return 100.0 * (base - adapted) / base


@dataclass
class ClassComparison:
    cls: TrafficClass
    base_avg: Optional[float]
    adapted_avg: Optional[float]

    @property
    def ratio(self) -> Optional[float]:
        if self.base_avg in (None, 0) or self.adapted_avg is None:
            return None
        return self.adapted_avg / self.base_avg

    @property
    def improvement(self) -> Optional[float]:
        return improvement(self.base_avg, self.adapted_avg)


@dataclass
class Comparison:
    base_scheme: str
    adapted_scheme: str
    classes: dict
    base_delivered: int
    adapted_delivered: int
    warnings: list = field(default_factory=list)

    @property
    def delivery_gap(self) -> float:
        if self.base_delivered == 0:
            return 0.0 if self.adapted_delivered == 0 else 1.0
        return abs(self.adapted_delivered - self.base_delivered) / self.base_delivered

    @property
    def parity_warning(self) -> bool:
        return self.delivery_gap > PARITY_TOLERANCE

    def report(self) -> str:
        lines = [f"baseline={self.base_scheme} adapted={self.adapted_scheme}",
                 "class,base_avg_us,adapted_avg_us,ratio,improvement_pct"]
        for cls, c in self.classes.items():
            cells = [c.base_avg, c.adapted_avg, c.ratio, c.improvement]
            lines.append(cls.label + "," + ",".join("" if v is None else f"{v:.3f}" for v in cells))
        lines.append(f"delivered,{self.base_delivered},{self.adapted_delivered},"
                     f"gap_pct={100 * self.delivery_gap:.2f}")
        for w in self.warnings:
            lines.append(f"WARNING: {w}")
        return "\n".join(lines) + "\n"


def config_mismatches(a, b) -> list[str]:
    ka, kb = a.key(), b.key()
    return [f"{k}: {ka[k]!r} != {kb[k]!r}" for k in ka if ka[k] != kb[k]]


def compare_runs(base, adapted) -> Comparison:
    """Compare two runs; each needs ``config``, ``average(cls)`` and ``delivered``."""
    diff = config_mismatches(base.config, adapted.config)
    if diff:
        raise ComparisonError("runs are not comparable: " + "; ".join(diff))
    classes = {cls: ClassComparison(cls, base.average(cls), adapted.average(cls))
               for cls in TrafficClass}
    cmp = Comparison(base.config.scheme, adapted.config.scheme, classes, base.delivered,
                     adapted.delivered)
    if cmp.parity_warning:
        cmp.warnings.append(f"sink delivery counts differ by {100 * cmp.delivery_gap:.2f}%")
    return cmp
