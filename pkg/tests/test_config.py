import dataclasses

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from dcbsim.config import (ConfigError, ScenarioConfig, get_value, keys, parse_scenario, serialize,
                           set_value)
from dcbsim.runner import priority_plans, stock, stock_names

KB = 1024


def test_empty_file_gives_defaults():
    cfg = parse_scenario("")
    assert (cfg.topology.leaves, cfg.topology.spines, cfg.topology.hosts_per_leaf) == (4, 2, 4)
    assert cfg.traffic.pattern == "many_to_one" and cfg.traffic.variant == "mixed"
    assert cfg.isolation.mode == "mixed"
    assert cfg.flow_control.pfc.enabled and cfg.flow_control.qcn.enabled


def test_isolated_strict_plans():
    cfg = parse_scenario("isolation.mode = isolated_strict")
    mice, eleph = priority_plans(cfg)
    assert mice.priority > eleph.priority
    assert mice.pfc and not mice.qcn and mice.partition == 48 * KB
    assert eleph.qcn and not eleph.pfc and eleph.partition == cfg.topology.port_buffer - 48 * KB


def test_sections_comments_and_qualified_keys():
    cfg = parse_scenario("""
        # comment
        flow_control.pfc.K1 = 30000   ; trailing
        [traffic]
        mice_load = 0.1
        traffic.variant = mice
        [flow_control]
        qcn.w = 3
    """)
    assert cfg.flow_control.pfc.K1 == 30000
    assert cfg.traffic.mice_load == 0.1 and cfg.traffic.variant == "mice"
    assert cfg.flow_control.qcn.w == 3.0


def test_size_suffixes():
    cfg = parse_scenario("topology.port_buffer = 128KB\nflow_control.pfc.headroom = 24.5KB")
    assert cfg.topology.port_buffer == 128 * KB
    assert cfg.flow_control.pfc.headroom == 25088
    with pytest.raises(ConfigError, match="integer"):
        parse_scenario("flow_control.pfc.headroom = 0.03MB")


def test_k1_round_trip():
    cfg = parse_scenario("flow_control.pfc.K1 = 25057")
    again = parse_scenario(serialize(cfg))
    assert again.flow_control.pfc.K1 == 25057
    assert again == cfg


@pytest.mark.parametrize("text,line,needle", [
    ("\n\ntopology.leafs = 3", 3, "unknown key"),
    ("[nope]", 1, "unknown section"),
    ("traffic.mice_load = 0.1\ntraffic.mice_load = 0.2", 2, "already set"),
    ("topology.leaves = many", 1, "expected a number"),
    ("garbage line", 1, "key = value"),
    ("\ntraffic.mice_load = 1.5", 2, "mice_load"),
    ("isolation.mode = isolated_strict\nisolation.mice_buffer = 200KB", 2, "mice_buffer"),
    ("\n\nflow_control.pfc.headroom = 100", 3, "headroom"),
    ("flow_control.pfc.K2 = 30000", 1, "K2"),
    ("\nisolation.scheduler = fifo", 2, "scheduler"),
])
def test_errors_carry_line_numbers(text, line, needle):
    with pytest.raises(ConfigError) as e:
        parse_scenario(text, "x.ini")
    assert f"x.ini:{line}:" in str(e.value)
    assert needle in str(e.value)


def test_every_key_is_reachable_from_text():
    for key in keys():
        value = get_value(ScenarioConfig(), key)
        cfg = parse_scenario(f"{key} = {serialize_value(value)}")
        assert get_value(cfg, key) == value


def serialize_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


_numeric = st.fixed_dictionaries({
    "topology.leaves": st.integers(4, 20),
    "topology.capacity_gbps": st.floats(1, 100, allow_nan=False),
    "traffic.mice_load": st.floats(0, 1),
    "traffic.mice_size_mean": st.integers(1, 9000),
    "flow_control.qcn.w": st.floats(0.1, 10),
    "flow_control.qcn.enabled": st.booleans(),
    "flow_control.transport.kind": st.sampled_from(["none", "tcp", "dctcp"]),
    "isolation.mode": st.sampled_from(["mixed", "isolated_strict", "isolated_ets"]),
    "isolation.mice_share": st.floats(0.01, 1),
    "sim.seed": st.integers(0, 2**40),
})


@settings(max_examples=100)
@given(_numeric)
def test_parse_serialize_round_trip(values):
    cfg = ScenarioConfig()
    for k, v in values.items():
        set_value(cfg, k, v)
    try:
        cfg.validate()
    except ConfigError:
        assume(False)
    assert parse_scenario(serialize(cfg)) == cfg


def test_stock_scenarios_parse_and_name_themselves():
    names = stock_names()
    for base in ("mice", "elephant", "mixed"):
        for fc in ("pfc", "qcn", "both"):
            assert f"many-to-one-{base}-{fc}" in names
    for n in ("head-of-line", "isolation-strict", "intra-rank", "inter-rank", "transport-tcp",
              "transport-dctcp", "isolation-ets-0", "isolation-ets-50"):
        assert n in names
    for n in names:
        assert stock(n).name == n


def test_config_dataclasses_have_defaults():
    for f in dataclasses.fields(ScenarioConfig):
        assert f.default is not dataclasses.MISSING or f.default_factory is not dataclasses.MISSING
