"""Build and run one scenario end to end."""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass, replace
from importlib import resources

from .config import ScenarioConfig, load_scenario, parse_scenario
from .engine import PS_PER_MS, PS_PER_US, Simulator
from .fabric import ETS, STRICT, FabricConfig, Network, PriorityPlan, Topology, build_leaf_spine
from .frame import MICE
from .metrics import Collector, MetricsReport, write_outputs
from .traffic import ELEPHANT_PRIORITY, MICE_PRIORITY, MIXED_PRIORITY, Flow, default_receiver, generate


@dataclass
class RunResult:
    config: ScenarioConfig
    report: MetricsReport
    flows: list[Flow]
    events: int
    network: Network


def priority_plans(cfg: ScenarioConfig) -> list[PriorityPlan]:
    fc, iso = cfg.flow_control, cfg.isolation
    dctcp = fc.transport.kind == "dctcp"
    buf = cfg.topology.port_buffer
    if not iso.isolated:
        return [PriorityPlan(MIXED_PRIORITY, buf, pfc=fc.pfc.enabled, qcn=fc.qcn.enabled, ecn=dctcp)]
    return [
        PriorityPlan(MICE_PRIORITY, iso.mice_buffer, pfc=fc.pfc.enabled and iso.mice_pfc,
                     weight=iso.mice_share),
        PriorityPlan(ELEPHANT_PRIORITY, buf - iso.mice_buffer, pfc=fc.pfc.enabled and iso.elephant_pfc,
                     qcn=fc.qcn.enabled, ecn=dctcp, weight=1 - iso.mice_share),
    ]


def fabric_config(cfg: ScenarioConfig) -> FabricConfig:
    fc, iso = cfg.flow_control, cfg.isolation
    return FabricConfig(
        plans=priority_plans(cfg),
        scheduler=ETS if iso.effective_scheduler == "ets" else STRICT,
        ets_quantum=iso.ets_quantum,
        K1=fc.pfc.K1,
        K2=fc.pfc.K2,
        qcn=fc.qcn,
        transport=fc.transport,
        policy=iso.policy(),
        seed=cfg.sim.seed,
    )


def topology(cfg: ScenarioConfig) -> Topology:
    t = cfg.topology
    return build_leaf_spine(t.leaves, t.spines, t.hosts_per_leaf, t.capacity_bps, t.prop_delay_ps)


def _monitor(net: Network, coll: Collector, topo: Topology, cfg: ScenarioConfig) -> None:
    spec = cfg.traffic
    cap = topo.capacity_bps

    def watch(label, device, port, sample=True):
        p = net.port(device, port)
        p.monitor = coll.monitor(label, cap)
        if sample:
            net.sampled_ports.append((label, p))
        return label

    if spec.pattern in ("many_to_one", "head_of_line"):
        rx = default_receiver(spec, topo)
        leaf = topo.leaf_of(rx)
        coll.bottleneck = watch(f"leaf{leaf}->h{rx}", f"leaf{leaf}", rx % topo.hosts_per_leaf)
        if spec.pattern == "head_of_line":
            coll.groups["victim"] = [watch(f"leaf1->spine{s}", "leaf1", topo.uplink_port(s))
                                     for s in range(topo.spine_count)]
    elif spec.pattern == "intra_rank":
        q = topo.hosts_under(0)[0]
        coll.bottleneck = watch(f"leaf0->h{q}", "leaf0", 0)
    elif spec.pattern == "inter_rank":
        q = topo.hosts_under(0)[0]
        coll.bottleneck = watch(f"leaf0->h{q}", "leaf0", 0)
        coll.groups["uplinks"] = [watch(f"leaf0->spine{s}", "leaf0", topo.uplink_port(s), False)
                                  for s in range(topo.spine_count)]


def run(cfg: ScenarioConfig, out_dir: str | os.PathLike | None = None,
        flows: list[Flow] | None = None) -> RunResult:
    cfg.validate()
    topo = topology(cfg)
    horizon = round(cfg.sim.horizon_ms * PS_PER_MS)
    warmup = round(cfg.sim.warmup_ms * PS_PER_MS)
    fcfg = fabric_config(cfg)
    if flows is None:
        spec = replace(cfg.traffic, seed=cfg.sim.seed)
        flows = generate(spec, topo, horizon, fcfg.policy, topo.capacity_bps)
    sim = Simulator()
    coll = Collector(horizon, warmup, round(cfg.sim.throughput_bin_us * PS_PER_US),
                     round(cfg.sim.queue_sample_us * PS_PER_US))
    net = Network(sim, topo, fcfg, coll, flows)
    _monitor(net, coll, topo, cfg)
    net.start()
    events = sim.run_until(horizon)
    report = coll.report(net)
    if out_dir is not None:
        write_outputs(report, out_dir, {"scenario": cfg.name, "seed": cfg.sim.seed, "events": events,
                                        "mice_flows": sum(1 for f in flows if f.cls == MICE),
                                        "flows": len(flows)})
    return RunResult(cfg, report, flows, events, net)


# ------------------------------------------------------------- stock configs

def stock_names() -> list[str]:
    root = resources.files("dcbsim") / "scenarios"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def stock_text(name: str) -> str:
    path = resources.files("dcbsim") / "scenarios" / f"{name}.ini"
    if not path.is_file():
        raise FileNotFoundError(f"no stock scenario named {name!r}; have {', '.join(stock_names())}")
    return path.read_text()


def stock(name: str) -> ScenarioConfig:
    cfg = parse_scenario(stock_text(name), f"{name}.ini")
    if cfg.name == "scenario":
        cfg.name = name
    return cfg


def resolve(arg: str) -> ScenarioConfig:
    """A path to a scenario file, or the name of a stock scenario."""
    if os.path.exists(arg):
        return load_scenario(arg)
    return stock(arg)


def with_overrides(cfg: ScenarioConfig, **sim) -> ScenarioConfig:
    out = copy.deepcopy(cfg)
    for key, value in sim.items():
        if value is not None:
            setattr(out.sim, key, value)
    return out
