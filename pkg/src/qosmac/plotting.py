"""Cumulative end-to-end delay figures rendered to self-contained SVG."""

from __future__ import annotations

from itertools import accumulate
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .qos import TrafficClass  # noqa: E402

# fixed ids and no timestamp so the same data gives byte-identical files
_RC = {"svg.hashsalt": "qosmac", "svg.fonttype": "path"}
STYLES = {TrafficClass.I: "-", TrafficClass.II: "--"}


def plot_cumulative(records, path: str | Path, title: str = "") -> Path:
    """One curve per (run, class): cumulative delay in seconds vs. packets received."""
    path = Path(path)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for rec in records:
            for cls in TrafficClass:
                delays = rec.delays[cls]
                if not delays:
                    continue
                ys = [v / 1e6 for v in accumulate(delays)]
                ax.plot(range(1, len(ys) + 1), ys, STYLES[cls],
                        label=f"{rec.scheme} class {cls.label}")
        ax.set_xlabel("packets received at sink")
        ax.set_ylabel("cumulative end-to-end delay (s)")
        if title:
            ax.set_title(title)
        ax.grid(alpha=0.3)
        if ax.lines:
            ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path
