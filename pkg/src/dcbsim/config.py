"""Scenario files: sectioned ``key = value`` text.

Keys may be written inside a section (``[flow_control]`` then
``pfc.K1 = 25057``) or fully qualified at the top (``flow_control.pfc.K1 =
25057``). Every key has a default, unknown keys are rejected, and every
error carries the line it came from.
"""

from __future__ import annotations

import dataclasses
import os
import re
from dataclasses import dataclass, field

from .pfc import PfcConfig, required_headroom
from .qcn import QcnConfig
from .traffic import IsolationPolicy, TrafficSpec
from .transport import TransportConfig

KB = 1024
PS_PER_US = 1_000_000

_SUFFIXES = {"kb": KB, "mb": KB * KB, "k": 1000, "m": 10**6, "g": 10**9}


class ConfigError(ValueError):
    pass


@dataclass
class TopologyConfig:
    leaves: int = 4
    spines: int = 2
    hosts_per_leaf: int = 4
    capacity_gbps: float = 10.0
    prop_delay_us: float = 2.0
    port_buffer: int = 100 * KB        # per ingress port, split across priorities

    def validate(self) -> None:
        if min(self.leaves, self.spines, self.hosts_per_leaf) < 1:
            raise ValueError("leaves, spines and hosts_per_leaf must be >= 1")
        if self.capacity_gbps <= 0:
            raise ValueError("capacity_gbps must be positive")
        if self.prop_delay_us < 0:
            raise ValueError("prop_delay_us must be >= 0")
        if self.port_buffer <= 0:
            raise ValueError("port_buffer must be positive")

    @property
    def capacity_bps(self) -> float:
        return self.capacity_gbps * 1e9

    @property
    def prop_delay_ps(self) -> int:
        return round(self.prop_delay_us * PS_PER_US)


@dataclass
class FlowControlConfig:
    pfc: PfcConfig = field(default_factory=PfcConfig)
    qcn: QcnConfig = field(default_factory=QcnConfig)
    transport: TransportConfig = field(default_factory=TransportConfig)


@dataclass
class IsolationConfig(IsolationPolicy):
    scheduler: str = "auto"            # auto | strict | ets
    ets_quantum: int = 15000           # bytes per DRR round at weight 1

    def validate(self) -> None:
        super().validate()
        if self.scheduler not in ("auto", "strict", "ets"):
            raise ValueError(f"scheduler must be auto, strict or ets, got {self.scheduler!r}")
        if self.ets_quantum <= 0:
            raise ValueError("ets_quantum must be positive")

    @property
    def effective_scheduler(self) -> str:
        if self.scheduler != "auto":
            return self.scheduler
        return "ets" if self.mode == "isolated_ets" else "strict"

    def policy(self) -> IsolationPolicy:
        return IsolationPolicy(self.mode, self.boundary, self.mice_share, self.mice_buffer,
                               self.mice_pfc, self.elephant_pfc)


@dataclass
class SimConfig:
    horizon_ms: float = 50.0
    warmup_ms: float = 5.0
    seed: int = 1
    out_dir: str = "out"
    queue_sample_us: float = 10.0
    throughput_bin_us: float = 100.0

    def validate(self) -> None:
        if self.horizon_ms <= 0:
            raise ValueError("horizon_ms must be positive")
        if not 0 <= self.warmup_ms < self.horizon_ms:
            raise ValueError("warmup_ms must be in [0, horizon_ms)")
        if self.queue_sample_us <= 0 or self.throughput_bin_us <= 0:
            raise ValueError("queue_sample_us and throughput_bin_us must be positive")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    traffic: TrafficSpec = field(default_factory=TrafficSpec)
    flow_control: FlowControlConfig = field(default_factory=FlowControlConfig)
    isolation: IsolationConfig = field(default_factory=IsolationConfig)
    sim: SimConfig = field(default_factory=SimConfig)

    def validate(self) -> None:
        validate(self)


# traffic.seed is driven by sim.seed so a run has exactly one seed
_HIDDEN = {"traffic.seed"}
SECTIONS = ("topology", "traffic", "flow_control", "isolation", "sim")


def _leaves(obj, prefix: str):
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        key = f"{prefix}.{f.name}" if prefix else f.name
        if dataclasses.is_dataclass(value):
            yield from _leaves(value, key)
        elif key not in _HIDDEN:
            yield key, value


def keys() -> list[str]:
    return [k for k, _ in _leaves(ScenarioConfig(), "")]


def get_value(cfg: ScenarioConfig, key: str):
    obj = cfg
    for part in key.split("."):
        obj = getattr(obj, part)
    return obj


def set_value(cfg: ScenarioConfig, key: str, value) -> None:
    parts = key.split(".")
    obj = cfg
    for part in parts[:-1]:
        obj = getattr(obj, part)
    setattr(obj, parts[-1], value)


def coerce(text: str, like):
    """Convert ``text`` to the type of the default value ``like``."""
    t = text.strip()
    if isinstance(like, bool):
        low = t.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if isinstance(like, int):
        value = _number(t)
        if value != int(value):
            raise ValueError(f"expected an integer, got {text!r}")
        return int(value)
    if isinstance(like, float):
        return float(_number(t))
    return t


def _number(text: str) -> float:
    low = text.lower().replace("_", "")
    for suffix in sorted(_SUFFIXES, key=len, reverse=True):
        if low.endswith(suffix) and low[:-len(suffix)]:
            try:
                return float(low[:-len(suffix)]) * _SUFFIXES[suffix]
            except ValueError:
                break
    try:
        return float(low) if any(c in low for c in ".en") else int(low)
    except ValueError:
        raise ValueError(f"expected a number, got {text!r}") from None


def parse_scenario(text: str, source: str = "<scenario>") -> ScenarioConfig:
    cfg = ScenarioConfig()
    valid = dict(_leaves(cfg, ""))
    lines: dict[str, int] = {}
    section = ""
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"{source}:{lineno}: malformed section header {raw.strip()!r}")
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"{source}:{lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if section and not key.startswith(section + "."):
            key = f"{section}.{key}"
        if key not in valid:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in lines:
            raise ConfigError(f"{source}:{lineno}: {key!r} already set on line {lines[key]}")
        try:
            set_value(cfg, key, coerce(value, valid[key]))
        except ValueError as e:
            raise ConfigError(f"{source}:{lineno}: {key}: {e}") from None
        lines[key] = lineno
    try:
        validate(cfg)
    except ConfigError as e:
        key = e.args[1] if len(e.args) > 1 else None
        where = f"{source}:{lines[key]}" if key in lines else f"{source}"
        raise ConfigError(f"{where}: {e.args[0]}") from None
    return cfg


def load_scenario(path: str | os.PathLike) -> ScenarioConfig:
    with open(path) as fh:
        cfg = parse_scenario(fh.read(), str(path))
    if cfg.name == "scenario":
        cfg.name = os.path.splitext(os.path.basename(str(path)))[0]
    return cfg


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize(cfg: ScenarioConfig) -> str:
    out = [f"name = {cfg.name}"]
    for section in SECTIONS:
        out.append(f"\n[{section}]")
        for key, value in _leaves(getattr(cfg, section), ""):
            if f"{section}.{key}" in _HIDDEN:
                continue
            out.append(f"{key} = {_fmt(value)}")
    return "\n".join(out) + "\n"


def validate(cfg: ScenarioConfig) -> None:
    """Field ranges plus cross-section consistency. Raises ConfigError whose
    second argument is the offending key."""
    checks = [
        ("topology", cfg.topology.validate),
        ("traffic", cfg.traffic.validate),
        ("flow_control.pfc", lambda: _check_pfc_fields(cfg.flow_control.pfc)),
        ("flow_control.qcn", cfg.flow_control.qcn.validate),
        ("flow_control.transport", cfg.flow_control.transport.validate),
        ("isolation", cfg.isolation.validate),
        ("sim", cfg.sim.validate),
    ]
    for prefix, check in checks:
        try:
            check()
        except ValueError as e:
            raise ConfigError(str(e), _guess_key(prefix, str(e))) from None

    topo, iso, pfc = cfg.topology, cfg.isolation, cfg.flow_control.pfc
    if iso.isolated and iso.mice_buffer >= topo.port_buffer:
        raise ConfigError(f"isolation.mice_buffer ({iso.mice_buffer}) must leave room for the "
                          f"elephant class in topology.port_buffer ({topo.port_buffer})",
                          "isolation.mice_buffer")
    need = required_headroom(topo.prop_delay_ps, topo.capacity_bps)
    for partition, on in pfc_partitions(cfg):
        if not on:
            continue
        if pfc.headroom < need:
            raise ConfigError(f"flow_control.pfc.headroom {pfc.headroom} B is below the {need} B "
                              f"in flight over a {topo.prop_delay_us} us link",
                              "flow_control.pfc.headroom")
        if pfc.K1 + pfc.headroom > partition:
            raise ConfigError(f"flow_control.pfc.K1 + headroom = {pfc.K1 + pfc.headroom} B exceeds "
                              f"the {partition} B buffer partition", "flow_control.pfc.K1")
    if cfg.traffic.pattern == "head_of_line" and topo.leaves < 4:
        raise ConfigError("head_of_line needs at least 4 leaves", "topology.leaves")


def _check_pfc_fields(pfc: PfcConfig) -> None:
    if not 0 <= pfc.K2 < pfc.K1:
        raise ValueError(f"need 0 <= K2 < K1, got K2={pfc.K2}, K1={pfc.K1}")
    if pfc.headroom < 0:
        raise ValueError("headroom must be >= 0")


def _guess_key(prefix: str, message: str) -> str:
    """The key whose name appears first in ``message``."""
    best = None
    for key in keys():
        if not key.startswith(prefix + "."):
            continue
        m = re.search(rf"\b{re.escape(key.split('.')[-1])}\b", message)
        if m and (best is None or m.start() < best[0]):
            best = (m.start(), key)
    return best[1] if best else prefix


def pfc_partitions(cfg: ScenarioConfig) -> list[tuple[int, bool]]:
    """(partition bytes, PFC on) for each priority class in use."""
    iso, pfc = cfg.isolation, cfg.flow_control.pfc
    buf = cfg.topology.port_buffer
    if not iso.isolated:
        return [(buf, pfc.enabled)]
    return [(iso.mice_buffer, pfc.enabled and iso.mice_pfc),
            (buf - iso.mice_buffer, pfc.enabled and iso.elephant_pfc)]
