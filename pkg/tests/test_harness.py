import csv
import math
import re

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from qosmac.cli import main
from qosmac.compare import ComparisonError, compare_runs, improvement
from qosmac.config import RunConfig
from qosmac.export import read_run, write_run
from qosmac.metrics import Delivery, MetricsLog, finalize
from qosmac.plotting import plot_cumulative
from qosmac.qos import TrafficClass
from qosmac.sim import run_simulation

SHORT = dict(duration=120.0)


@pytest.fixture(scope="module")
def pair(tmp_path_factory):
    root = tmp_path_factory.mktemp("runs")
    out = {}
    for scheme in ("baseline", "all"):
        res = run_simulation(RunConfig(scheme=scheme, seed=3, **SHORT))
        write_run(res, root / scheme)
        out[scheme] = res
    return root, out


def test_periodic_and_poisson_generation_counts():
    cfg = RunConfig(duration=100.0, warmup_s=0.0, traffic_period_s=10.0)
    res = run_simulation(cfg)
    gen = res.metrics.generated
    assert gen[TrafficClass.II] == 80
    assert abs(gen[TrafficClass.I] - 80) <= 3 * math.sqrt(80)
    origins = {d.origin_node for d in res.metrics.deliveries}
    assert 0 not in origins


def test_long_run_class_ratio_near_one():
    res = run_simulation(RunConfig(duration=400.0, seed=2))
    g = res.metrics.generated
    assert g[TrafficClass.I] / g[TrafficClass.II] == pytest.approx(1.0, abs=0.15)


def test_conservation_exact(pair):
    _, runs = pair
    for res in runs.values():
        m = res.metrics
        assert sum(m.generated.values()) == len(m.deliveries) + m.dropped_total + m.in_flight()
        assert not res.violations


def test_csv_schema_and_rows(pair):
    root, runs = pair
    path = root / "baseline" / "deliveries.csv"
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["arrival_index", "class", "origin_node", "origin_time_us", "sink_time_us",
                       "delay_us", "cumulative_delay_us"]
    assert len(rows) == runs["baseline"].delivered + 1
    head = next(csv.reader((root / "baseline" / "adaptations.csv").open()))
    assert head == ["time_us", "node", "scheme", "parameter", "old_value", "new_value",
                    "trigger_D_us", "trigger_S_us", "U", "rho", "N_next_hop"]
    for label in ("I", "II"):
        cum = [int(r[6]) for r in rows[1:] if r[1] == label]
        assert cum == sorted(cum)
        idx = [int(r[0]) for r in rows[1:] if r[1] == label]
        assert idx == list(range(1, len(idx) + 1))


def test_rerun_is_byte_identical(pair, tmp_path):
    root, _ = pair
    again = run_simulation(RunConfig(scheme="all", seed=3, **SHORT))
    write_run(again, tmp_path)
    for f in ("deliveries.csv", "adaptations.csv", "ledger.csv", "summary.csv", "config.txt"):
        assert (tmp_path / f).read_bytes() == (root / "all" / f).read_bytes()


def test_read_back_matches_result(pair):
    root, runs = pair
    rec = read_run(root / "all")
    for cls in TrafficClass:
        assert rec.average(cls) == pytest.approx(runs["all"].average(cls))
    assert rec.delivered == runs["all"].delivered


def test_self_comparison_is_zero(pair):
    root, _ = pair
    rec = read_run(root / "baseline")
    cmp = compare_runs(rec, rec)
    assert all(c.improvement == 0 for c in cmp.classes.values())
    assert not cmp.parity_warning


def test_improvement_arithmetic():
    assert improvement(2.0e6, 1.2e6) == pytest.approx(40.0)
    assert improvement(None, 1.0) is None
    assert improvement(0, 1.0) is None


class _Fake:
    def __init__(self, scheme, avg, delivered, **cfg):
        self.config = RunConfig(scheme=scheme, **cfg)
        self._avg = avg
        self.delivered = delivered

    def average(self, cls):
        return self._avg


def test_parity_warning_and_mismatch():
    cmp = compare_runs(_Fake("baseline", 2.0e6, 100), _Fake("cw", 1.2e6, 97))
    assert cmp.parity_warning and "WARNING" in cmp.report()
    assert cmp.classes[TrafficClass.I].improvement == pytest.approx(40.0)
    assert not compare_runs(_Fake("baseline", 1, 100), _Fake("cw", 1, 98)).parity_warning
    with pytest.raises(ComparisonError, match="seed"):
        compare_runs(_Fake("baseline", 1, 1, seed=1), _Fake("cw", 1, 1, seed=2))


def test_empty_run_reports_absent_average():
    s = finalize(MetricsLog())
    assert s.average(TrafficClass.I) is None
    assert s.delivered == 0


def test_finalize_cumulative_series():
    m = MetricsLog()
    for k, d in enumerate([5, 3, 7]):
        m.deliveries.append(Delivery(TrafficClass.I, 1, 0, d, k))
    s = finalize(m)
    assert s.classes[TrafficClass.I].delays == [5, 3, 7]
    assert s.average(TrafficClass.I) == 5


def test_two_runs_give_four_curves(pair, tmp_path):
    root, _ = pair
    out = plot_cumulative([read_run(root / "baseline"), read_run(root / "all")], tmp_path / "f.svg")
    svg = out.read_text()
    labels = [t for t in re.findall(r"<!-- (.*?) -->", svg) if " class " in t]
    assert labels == ["baseline class I", "baseline class II", "all class I", "all class II"]
    assert svg.count("stroke-dasharray") >= 2  # class II curves are dashed


def test_plot_is_deterministic(pair, tmp_path):
    root, _ = pair
    rec = [read_run(root / "baseline")]
    a = plot_cumulative(rec, tmp_path / "a.svg").read_bytes()
    b = plot_cumulative(rec, tmp_path / "b.svg").read_bytes()
    assert a == b


# ------------------------------------------------------------------------ CLI
def test_cli_run_compare_plot(tmp_path, capsys):
    base, adapted = tmp_path / "b", tmp_path / "a"
    assert main(["run", "--scheme", "baseline", "--seed", "2", "--duration", "60",
                 "--out", str(base)]) == 0
    assert (base / "cumulative_delay.svg").exists()
    assert main(["run", "--scheme", "cw", "--seed", "2", "--duration", "60", "--out", str(adapted),
                 "--no-plot", "--param", "alpha_cw=0.2"]) == 0
    assert main(["compare", str(base), str(adapted)]) == 1  # alpha differs
    assert main(["run", "--scheme", "cw", "--seed", "2", "--duration", "60",
                 "--out", str(adapted)]) == 0
    capsys.readouterr()
    assert main(["compare", str(base), str(adapted)]) == 0
    report = capsys.readouterr().out
    assert report.splitlines()[1] == "class,base_avg_us,adapted_avg_us,ratio,improvement_pct"
    assert main(["plot", str(base), str(adapted), "--out", str(tmp_path / "p.svg")]) == 0
    assert (tmp_path / "p.svg").exists()


@pytest.mark.parametrize("argv,code", [
    (["run", "--out", "X", "--param", "bogus=1"], 1),
    (["run", "--out", "X", "--param", "seed=x"], 1),
    (["run", "--out", "X", "--scenario", "file=/nonexistent/t.topo"], 2),
    (["compare", "/nonexistent/a", "/nonexistent/b"], 2),
    (["plot", "/nonexistent/a"], 2),
])
def test_cli_exit_codes(argv, code, tmp_path):
    argv = [str(tmp_path / "o") if a == "X" else a for a in argv]
    assert main(argv) == code


def test_cli_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["run", "--duration", "5", "--out", str(blocker / "sub"), "--no-plot"]) == 2


# ------------------------------------------------------------------ properties
@settings(max_examples=6, deadline=None, suppress_health_check=list(HealthCheck))
@given(st.integers(min_value=1, max_value=10**6),
       st.sampled_from(["baseline", "cw", "dc", "difs", "all", "xl-nexthop", "xl-route"]))
def test_invariants_hold_on_random_runs(seed, scheme):
    res = run_simulation(RunConfig(scheme=scheme, seed=seed, duration=60.0,
                                   traffic_period_s=3.0, warmup_s=13.0), strict=True)
    assert res.monitor.checks > 0
    assert not res.violations
