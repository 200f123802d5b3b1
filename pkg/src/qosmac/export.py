"""CSV/text output of a finished run and reading it back for comparison and plotting."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from statistics import fmean
from typing import Optional

from .config import RunConfig, parse_pairs
from .qos import TrafficClass

DELIVERY_COLUMNS = ["arrival_index", "class", "origin_node", "origin_time_us", "sink_time_us",
                    "delay_us", "cumulative_delay_us"]
ADAPTATION_COLUMNS = ["time_us", "node", "scheme", "parameter", "old_value", "new_value",
                      "trigger_D_us", "trigger_S_us", "U", "rho", "N_next_hop"]
ROUTE_COLUMNS = ["time_us", "src", "dst", "s_link_avg_us", "lc_overall", "selected"]
LEDGER_COLUMNS = ["time_us", "node", "trx_us", "ttx_us", "tidle_us", "awake_us", "duty_cycle"]
SUMMARY_COLUMNS = ["class", "generated", "delivered", "avg_delay_us"]


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        if v.is_integer():
            return str(int(v))
        return f"{v:.6f}".rstrip("0")
    return str(v)


def delivery_rows(deliveries) -> list[list]:
    index = {cls: 0 for cls in TrafficClass}
    total = {cls: 0 for cls in TrafficClass}
    rows = []
    for d in deliveries:
        index[d.cls] += 1
        total[d.cls] += d.delay
        rows.append([index[d.cls], d.cls.label, d.origin_node, d.origin_time, d.sink_time,
                     d.delay, total[d.cls]])
    return rows


def _write(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_run(result, out_dir: str | Path) -> list[Path]:
    """Write every table of ``result`` into ``out_dir``; returns the files written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    m = result.metrics
    files = {
        "deliveries.csv": (DELIVERY_COLUMNS, delivery_rows(m.deliveries)),
        "adaptations.csv": (ADAPTATION_COLUMNS, m.adaptations),
        "routes.csv": (ROUTE_COLUMNS, m.routes),
        "ledger.csv": (LEDGER_COLUMNS, m.ledger),
    }
    summary_rows = [[cls.label, c.generated, c.delivered, c.average]
                    for cls, c in result.summary.classes.items()]
    files["summary.csv"] = (SUMMARY_COLUMNS, summary_rows)
    written = []
    for name, (header, rows) in files.items():
        _write(out / name, header, rows)
        written.append(out / name)
    drops = out / "drops.csv"
    _write(drops, ["cause", "count"], sorted(m.drops.items()))
    written.append(drops)
    cfg = out / "config.txt"
    cfg.write_text(result.config.to_text())
    written.append(cfg)
    return written


@dataclass
class RunRecord:
    """A run read back from its output directory."""

    path: Path
    config: RunConfig
    delays: dict  # TrafficClass -> list of delays in arrival order

    @property
    def scheme(self) -> str:
        return self.config.scheme

    def average(self, cls: TrafficClass) -> Optional[float]:
        d = self.delays[cls]
        return fmean(d) if d else None

    @property
    def delivered(self) -> int:
        return sum(len(v) for v in self.delays.values())


def read_run(path: str | Path) -> RunRecord:
    path = Path(path)
    cfg_file = path / "config.txt"
    values = parse_pairs(cfg_file.read_text().splitlines())
    config = RunConfig(**values)
    delays = {cls: [] for cls in TrafficClass}
    by_label = {cls.label: cls for cls in TrafficClass}
    with (path / "deliveries.csv").open(newline="") as fh:
        for row in csv.DictReader(fh):
            delays[by_label[row["class"]]].append(int(row["delay_us"]))
    return RunRecord(path, config, delays)
