"""Command-line entry point: ``qosmac-sim run|compare|plot``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .compare import ComparisonError, compare_runs
from .config import ConfigError, load_config
from .export import read_run, write_run
from .plotting import plot_cumulative
from .qos import Scheme, TrafficClass
from .sim import run_simulation
from .topology import TopologyError

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2
log = logging.getLogger("qosmac")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qosmac-sim", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one scenario under one scheme")
    run.add_argument("--scenario", default=None, help="grid1, grid2 or file=PATH")
    run.add_argument("--scheme", default=None, choices=[s.value for s in Scheme])
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--duration", type=float, default=None, help="simulated seconds")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--config", default=None, help="key=value config file")
    run.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                     help="override one config key (repeatable)")
    run.add_argument("--no-plot", action="store_true")

    cmp = sub.add_parser("compare", help="per-class delay improvement of ADAPTED over BASE")
    cmp.add_argument("base")
    cmp.add_argument("adapted")

    plot = sub.add_parser("plot", help="cumulative-delay SVG for one or more run directories")
    plot.add_argument("dirs", nargs="+")
    plot.add_argument("--out", default=None, help="SVG path (default: first DIR/cumulative_delay.svg)")
    return p


def cmd_run(args) -> int:
    base = {k: v for k, v in (("scenario", args.scenario), ("scheme", args.scheme),
                              ("seed", args.seed), ("duration", args.duration)) if v is not None}
    base["out"] = args.out
    try:
        cfg = load_config(args.config, args.param, **base)
        result = run_simulation(cfg)
    except (ConfigError, TopologyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        write_run(result, args.out)
        if not args.no_plot:
            plot_cumulative([result], Path(args.out) / "cumulative_delay.svg",
                            f"{cfg.scenario} seed {cfg.seed}")
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    s = result.summary
    for cls in TrafficClass:
        c = s.classes[cls]
        avg = "n/a" if c.average is None else f"{c.average / 1e3:.1f} ms"
        print(f"class {cls.label}: generated {c.generated} delivered {c.delivered} avg delay {avg}")
    if result.violations:
        for v in result.violations:
            print(f"invariant violated: {v}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        base, adapted = read_run(args.base), read_run(args.adapted)
    except (OSError, KeyError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = compare_runs(base, adapted)
    except ComparisonError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    sys.stdout.write(report.report())
    return EXIT_OK


def cmd_plot(args) -> int:
    try:
        records = [read_run(d) for d in args.dirs]
        out = args.out or Path(args.dirs[0]) / "cumulative_delay.svg"
        plot_cumulative(records, out)
    except (OSError, KeyError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(out)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "compare": cmd_compare, "plot": cmd_plot}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
