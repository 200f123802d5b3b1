from importlib import resources

import pytest

from qosmac.config import ConfigError, RunConfig, load_config, parse_pairs
from qosmac.topology import (
    TopologyError,
    build_scenario_1,
    build_scenario_2,
    format_topology,
    load_topology,
    parse_topology,
)


def test_small_grid_diagonals_are_links():
    t = build_scenario_1()
    assert t.distance(0, 4) == pytest.approx(197.99, abs=0.01)
    assert 4 in t.adjacency()[0]
    assert 8 not in t.adjacency()[0]


def test_large_grid_diagonals_are_not_links():
    t = build_scenario_2()
    assert t.distance(0, 6) == pytest.approx(353.55, abs=0.01)
    assert 6 not in t.adjacency()[0]
    assert sorted(t.adjacency()[0]) == [1, 5]


def test_far_corner_is_eight_hops():
    t = build_scenario_2()
    assert t.hops(24) == 8
    assert build_scenario_1().hops(8) == 4
    assert all(t.hops(n) == (n // 5) + (n % 5) for n in t.nodes if n)


def test_format_parse_round_trip():
    for t in (build_scenario_1(), build_scenario_2()):
        back = parse_topology(format_topology(t))
        assert (back.positions, back.routes, back.sink, back.comm_range) == \
            (t.positions, t.routes, t.sink, t.comm_range)


@pytest.mark.parametrize("name", ["two_path", "border_chain", "star"])
def test_bundled_scenarios_load(name):
    path = resources.files("qosmac") / "scenarios" / f"{name}.topo"
    t = load_topology(path)
    assert t.name == name
    again = parse_topology(format_topology(t))
    assert (again.phases, again.fixed) == (t.phases, t.fixed)


@pytest.mark.parametrize("text,msg", [
    ("0 0 0\n1 50 0\nrange 100\n", "range"),
    ("0 0 0\n1 500 0\nrange 100\nsink 0\nroute 1 0\n", "radio link"),
    ("0 0 0\n1 50 0\n2 100 0\nrange 100\nsink 0\nroute 1 2\nroute 2 1\n", "loop"),
    ("0 0 0\n1 50 0\nrange 100\nsink 0\n", "cannot reach"),
    ("0 0 0\nbogus line here now\nrange 1\nsink 0\n", "line 2"),
    ("0 0 0\nrange 1\nsink 0\nschedule 0 0.5 sticky\n", "line 4"),
])
def test_bad_topologies(text, msg):
    with pytest.raises(TopologyError, match=msg):
        parse_topology(text)


def test_config_defaults_and_overrides(tmp_path):
    f = tmp_path / "c.txt"
    f.write_text("# comment\nseed = 4\nduration=100\n")
    cfg = load_config(f, ["scheme=dc"])
    assert (cfg.seed, cfg.duration, cfg.scheme) == (4, 100.0, "dc")
    assert cfg.eta == 0.5


def test_config_text_round_trip():
    cfg = RunConfig(scheme="all", seed=3, traffic_period_s=9.5)
    assert RunConfig(**parse_pairs(cfg.to_text().splitlines())) == cfg


@pytest.mark.parametrize("pairs", [["nonsense=1"], ["seed=abc"], ["scheme=edca"], ["noequals"],
                                   ["dc_min=70"], ["eta=1"], ["difs1_slots=20"],
                                   ["scenario=grid9"]])
def test_config_errors(pairs):
    with pytest.raises(ConfigError):
        load_config(None, pairs)


def test_comparability_key_ignores_scheme_only():
    a, b = RunConfig(scheme="baseline"), RunConfig(scheme="cw", out="x")
    assert a.key() == b.key()
    assert a.key() != RunConfig(seed=2).key()
