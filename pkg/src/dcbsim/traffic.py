"""Flow generation, mice/elephant classification and priority assignment.

Every generator is a pure function of (spec, topology, horizon): the same
inputs always give the same flow schedule, so schedules can be built up
front and replayed from the text table written by :func:`write_flow_table`.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, replace

import numpy as np

from .frame import CLASS_NAMES, ELEPHANT, MICE

KB = 1024
PS_PER_NS = 1_000
PS_PER_US = 1_000_000

PATTERNS = ("many_to_one", "head_of_line", "intra_rank", "inter_rank", "poisson_background")
VARIANTS = ("mixed", "mice", "elephant")
MODES = ("mixed", "isolated_strict", "isolated_ets")

MIXED_PRIORITY = 0
MICE_PRIORITY = 1
ELEPHANT_PRIORITY = 0


@dataclass
class Flow:
    id: int
    src: int
    dst: int
    size: int
    cls: int
    arrival_ns: int
    priority: int = 0
    size_known: bool = True
    declared: int | None = None

    def __post_init__(self) -> None:
        if self.size <= 0:
            raise ValueError(f"flow {self.id}: size must be positive")
        if self.src == self.dst:
            raise ValueError(f"flow {self.id}: src == dst == {self.src}")

    @property
    def arrival_ps(self) -> int:
        return self.arrival_ns * PS_PER_NS

    @property
    def class_name(self) -> str:
        return CLASS_NAMES[self.cls]


@dataclass
class TrafficSpec:
    pattern: str = "many_to_one"
    variant: str = "mixed"
    mice_load: float = 0.05
    mice_size_dist: str = "uniform"        # uniform | exponential | fixed
    mice_size_min: int = 1 * KB
    mice_size_max: int = 10 * KB
    mice_size_mean: int = 2 * KB
    elephants_per_sender: int = 1
    elephant_size: int = 0                 # 0: persistent for the whole run
    receiver: int = -1                     # -1: first host under the last leaf
    incast: bool = True
    victims_per_host: int = 1
    query_period_us: float = 0.0           # 0: 100 us intra-rank, 1000 us inter-rank
    responders: int = 7
    response_size: int = 7885              # 7.7 KB
    background_elephants: int = 2
    seed: int = 1

    def validate(self) -> None:
        if self.pattern not in PATTERNS:
            raise ValueError(f"traffic pattern must be one of {PATTERNS}, got {self.pattern!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"traffic variant must be one of {VARIANTS}, got {self.variant!r}")
        if not 0 <= self.mice_load <= 1:
            raise ValueError(f"mice_load must be in [0, 1], got {self.mice_load}")
        if self.mice_size_dist not in ("uniform", "exponential", "fixed"):
            raise ValueError(f"unknown mice_size_dist {self.mice_size_dist!r}")
        if not 0 < self.mice_size_min < self.mice_size_max:
            raise ValueError("need 0 < mice_size_min < mice_size_max")
        if self.mice_size_mean <= 0 or self.response_size <= 0 or self.elephant_size < 0:
            raise ValueError("flow sizes must be positive")
        if self.elephants_per_sender < 0 or self.victims_per_host < 0 or self.background_elephants < 0:
            raise ValueError("flow counts must be >= 0")
        if self.query_period_us < 0 or self.responders < 1:
            raise ValueError("query_period_us must be >= 0 and responders >= 1")

    @property
    def mean_mice_size(self) -> float:
        if self.mice_size_dist == "uniform":
            return (self.mice_size_min + self.mice_size_max - 1) / 2
        return float(self.mice_size_mean)


@dataclass
class IsolationPolicy:
    mode: str = "mixed"
    boundary: int = 100 * KB
    mice_share: float = 0.9
    mice_buffer: int = 48 * KB
    mice_pfc: bool = True
    elephant_pfc: bool = False

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"isolation mode must be one of {MODES}, got {self.mode!r}")
        if not 10 * KB <= self.boundary <= 100 * KB:
            raise ValueError(f"boundary must be within [10KB, 100KB], got {self.boundary}")
        if not 0 < self.mice_share <= 1:
            raise ValueError(f"mice_share must be in (0, 1], got {self.mice_share}")
        if self.mice_buffer <= 0:
            raise ValueError("mice_buffer must be positive")

    @property
    def isolated(self) -> bool:
        return self.mode != "mixed"


def classify(size: int | None, policy: IsolationPolicy, declared: int | None = None) -> int:
    """MICE below the boundary, ELEPHANT at or above it. An application
    declaration wins; an unknown size starts out as MICE."""
    if declared is not None:
        return declared
    if size is None:
        return MICE
    return MICE if size < policy.boundary else ELEPHANT


def class_at_offset(flow: Flow, offset: int, policy: IsolationPolicy) -> int:
    """Class of the byte at ``offset``: unknown-size flows are promoted to
    ELEPHANT once the boundary has been transmitted."""
    if flow.declared is not None or flow.size_known:
        return flow.cls
    return MICE if offset < policy.boundary else ELEPHANT


def assign_priority(cls: int, policy: IsolationPolicy) -> int:
    if not policy.isolated:
        return MIXED_PRIORITY
    return MICE_PRIORITY if cls == MICE else ELEPHANT_PRIORITY


def ets_weights(policy: IsolationPolicy) -> dict[int, float]:
    if policy.mode != "isolated_ets":
        return {}
    return {MICE_PRIORITY: policy.mice_share, ELEPHANT_PRIORITY: 1 - policy.mice_share}


# ----------------------------------------------------------------- generators

def _rng(spec: TrafficSpec) -> np.random.Generator:
    return np.random.default_rng(spec.seed)


def _mice_sizes(spec: TrafficSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    if spec.mice_size_dist == "uniform":
        return rng.integers(spec.mice_size_min, spec.mice_size_max, size=n)
    if spec.mice_size_dist == "exponential":
        # redraw anything at or above the mice ceiling so every mouse stays below it
        sizes = np.maximum(1, np.rint(rng.exponential(spec.mice_size_mean, size=n))).astype(np.int64)
        bad = sizes >= spec.mice_size_max
        while bad.any():
            redo = np.maximum(1, np.rint(rng.exponential(spec.mice_size_mean, size=int(bad.sum()))))
            sizes[bad] = redo.astype(np.int64)
            bad = sizes >= spec.mice_size_max
        return sizes
    return np.full(n, spec.mice_size_mean, dtype=np.int64)


def _poisson_times(rng: np.random.Generator, rate_per_s: float, horizon_ns: int) -> np.ndarray:
    if rate_per_s <= 0 or horizon_ns <= 0:
        return np.empty(0, dtype=np.int64)
    mean_gap_ns = 1e9 / rate_per_s
    expected = horizon_ns / mean_gap_ns
    chunk = int(expected + 6 * np.sqrt(expected) + 16)
    t = np.cumsum(rng.exponential(mean_gap_ns, size=chunk))
    while t[-1] < horizon_ns:
        more = t[-1] + np.cumsum(rng.exponential(mean_gap_ns, size=chunk))
        t = np.concatenate([t, more])
    return np.rint(t[t < horizon_ns]).astype(np.int64)


def persistent_size(capacity_bps: float, horizon_ps: int) -> int:
    """A size no single link can drain within the horizon."""
    return int(capacity_bps * horizon_ps / 8e12) + 1


class _Builder:
    def __init__(self, policy: IsolationPolicy):
        self.policy = policy
        self.flows: list[Flow] = []

    def add(self, src: int, dst: int, size: int, arrival_ns: int) -> Flow:
        cls = classify(size, self.policy)
        flow = Flow(len(self.flows), int(src), int(dst), int(size), cls, int(arrival_ns),
                    assign_priority(cls, self.policy))
        self.flows.append(flow)
        return flow

    def finish(self) -> list[Flow]:
        order = sorted(self.flows, key=lambda f: (f.arrival_ns, f.id))
        return [replace(f, id=i) for i, f in enumerate(order)]


def _elephant_size(spec: TrafficSpec, capacity_bps: float, horizon_ps: int) -> int:
    return spec.elephant_size or persistent_size(capacity_bps, horizon_ps)


def _add_incast(b: _Builder, spec: TrafficSpec, rng: np.random.Generator, senders: list[int],
                receiver: int, capacity_bps: float, horizon_ps: int) -> None:
    if spec.variant in ("mixed", "elephant"):
        size = _elephant_size(spec, capacity_bps, horizon_ps)
        for s in senders:
            for _ in range(spec.elephants_per_sender):
                b.add(s, receiver, size, 0)
    if spec.variant in ("mixed", "mice") and spec.mice_load > 0:
        rate = spec.mice_load * capacity_bps / (8 * spec.mean_mice_size)
        times = _poisson_times(rng, rate, horizon_ps // PS_PER_NS)
        srcs = rng.integers(0, len(senders), size=len(times))
        sizes = _mice_sizes(spec, rng, len(times))
        for t, si, size in zip(times, srcs, sizes):
            b.add(senders[si], receiver, size, t)


def default_receiver(spec: TrafficSpec, topo) -> int:
    if spec.receiver >= 0:
        if spec.receiver >= topo.host_count:
            raise ValueError(f"receiver {spec.receiver} outside 0..{topo.host_count - 1}")
        return spec.receiver
    return topo.hosts_under(topo.leaf_count - 1)[0]


def gen_many_to_one(spec: TrafficSpec, topo, horizon_ps: int, policy: IsolationPolicy | None = None,
                    capacity_bps: float | None = None) -> list[Flow]:
    policy = policy or IsolationPolicy()
    capacity_bps = capacity_bps or topo.capacity_bps
    rng = _rng(spec)
    receiver = default_receiver(spec, topo)
    senders = [h for h in range(topo.host_count) if h != receiver]
    b = _Builder(policy)
    _add_incast(b, spec, rng, senders, receiver, capacity_bps, horizon_ps)
    return b.finish()


def gen_head_of_line(spec: TrafficSpec, topo, horizon_ps: int, policy: IsolationPolicy | None = None,
                     capacity_bps: float | None = None) -> list[Flow]:
    if topo.leaf_count < 4:
        raise ValueError("head-of-line scenario needs at least 4 leaves")
    policy = policy or IsolationPolicy()
    capacity_bps = capacity_bps or topo.capacity_bps
    rng = _rng(spec)
    receiver = default_receiver(spec, topo)
    b = _Builder(policy)
    if spec.incast:
        senders = [h for h in range(topo.host_count) if h != receiver]
        _add_incast(b, spec, rng, senders, receiver, capacity_bps, horizon_ps)
    victims_src = topo.hosts_under(1)
    victims_dst = topo.hosts_under(2)
    size = _elephant_size(spec, capacity_bps, horizon_ps)
    for i, src in enumerate(victims_src):
        for k in range(spec.victims_per_host):
            b.add(src, victims_dst[(i + k) % len(victims_dst)], size, 0)
    return b.finish()


def gen_query_response(kind: str, spec: TrafficSpec, topo, horizon_ps: int,
                       policy: IsolationPolicy | None = None,
                       capacity_bps: float | None = None) -> list[Flow]:
    policy = policy or IsolationPolicy()
    capacity_bps = capacity_bps or topo.capacity_bps
    rng = _rng(spec)
    horizon_ns = horizon_ps // PS_PER_NS
    big = _elephant_size(spec, capacity_bps, horizon_ps)
    b = _Builder(policy)
    if kind == "intra_rank":
        rank = topo.hosts_under(0)
        if len(rank) < spec.responders + 1:
            raise ValueError(f"intra-rank needs >= {spec.responders + 1} hosts under one leaf")
        period = round((spec.query_period_us or 100.0) * 1000)
        querier, responders = rank[0], rank[1:spec.responders + 1]
        for t in range(0, horizon_ns, period):
            for r in responders:
                b.add(r, querier, spec.response_size, t)
        for _ in range(spec.background_elephants):
            src, dst = rng.choice(rank, size=2, replace=False)
            b.add(src, dst, big, 0)
    elif kind == "inter_rank":
        if topo.leaf_count < spec.responders + 1:
            raise ValueError(f"inter-rank needs >= {spec.responders + 1} leaves")
        period = round((spec.query_period_us or 1000.0) * 1000)
        for leaf in range(topo.leaf_count):
            for querier in topo.hosts_under(leaf)[:2]:
                phase = int(rng.integers(0, period))
                others = [l for l in range(topo.leaf_count) if l != leaf]
                for t in range(phase, horizon_ns, period):
                    ranks = rng.choice(others, size=spec.responders, replace=False)
                    for r in ranks:
                        hosts = topo.hosts_under(int(r))
                        b.add(hosts[int(rng.integers(0, len(hosts)))], querier, spec.response_size, t)
        for _ in range(spec.background_elephants):
            sl, dl = rng.choice(topo.leaf_count, size=2, replace=False)
            src = topo.hosts_under(int(sl))[int(rng.integers(0, topo.hosts_per_leaf))]
            dst = topo.hosts_under(int(dl))[int(rng.integers(0, topo.hosts_per_leaf))]
            b.add(src, dst, big, 0)
    else:
        raise ValueError(f"unknown query-response kind {kind!r}")
    return b.finish()


def gen_poisson_background(spec: TrafficSpec, topo, horizon_ps: int,
                           policy: IsolationPolicy | None = None,
                           capacity_bps: float | None = None) -> list[Flow]:
    policy = policy or IsolationPolicy()
    capacity_bps = capacity_bps or topo.capacity_bps
    rng = _rng(spec)
    b = _Builder(policy)
    n = topo.host_count
    if spec.variant in ("mixed", "mice") and spec.mice_load > 0:
        rate = spec.mice_load * capacity_bps * n / (8 * spec.mean_mice_size)
        times = _poisson_times(rng, rate, horizon_ps // PS_PER_NS)
        sizes = _mice_sizes(spec, rng, len(times))
        for t, size in zip(times, sizes):
            src, dst = rng.choice(n, size=2, replace=False)
            b.add(src, dst, size, t)
    if spec.variant in ("mixed", "elephant"):
        big = _elephant_size(spec, capacity_bps, horizon_ps)
        for _ in range(spec.background_elephants):
            src, dst = rng.choice(n, size=2, replace=False)
            b.add(src, dst, big, 0)
    return b.finish()


def generate(spec: TrafficSpec, topo, horizon_ps: int, policy: IsolationPolicy | None = None,
             capacity_bps: float | None = None) -> list[Flow]:
    if spec.pattern == "many_to_one":
        return gen_many_to_one(spec, topo, horizon_ps, policy, capacity_bps)
    if spec.pattern == "head_of_line":
        return gen_head_of_line(spec, topo, horizon_ps, policy, capacity_bps)
    if spec.pattern in ("intra_rank", "inter_rank"):
        return gen_query_response(spec.pattern, spec, topo, horizon_ps, policy, capacity_bps)
    return gen_poisson_background(spec, topo, horizon_ps, policy, capacity_bps)


# ------------------------------------------------------------ flow table I/O

TABLE_COLUMNS = ("flow_id", "src", "dst", "size_bytes", "arrival_ns", "class")


def format_flow_table(flows: list[Flow]) -> str:
    out = io.StringIO()
    out.write("\t".join(TABLE_COLUMNS) + "\n")
    for f in flows:
        cls = f.class_name if f.size_known or f.declared is not None else "auto"
        out.write(f"{f.id}\t{f.src}\t{f.dst}\t{f.size}\t{f.arrival_ns}\t{cls}\n")
    return out.getvalue()


def write_flow_table(flows: list[Flow], path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        fh.write(format_flow_table(flows))


def parse_flow_table(text: str, policy: IsolationPolicy | None = None) -> list[Flow]:
    policy = policy or IsolationPolicy()
    flows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#") or line.startswith("flow_id"):
            continue
        parts = line.split()
        if len(parts) != len(TABLE_COLUMNS):
            raise ValueError(f"line {lineno}: expected {len(TABLE_COLUMNS)} columns, got {len(parts)}")
        fid, src, dst, size, arrival = (int(x) for x in parts[:5])
        label = parts[5]
        if label == "auto":
            flows.append(Flow(fid, src, dst, size, MICE, arrival, assign_priority(MICE, policy),
                              size_known=False))
            continue
        if label not in CLASS_NAMES:
            raise ValueError(f"line {lineno}: unknown class {label!r}")
        cls = CLASS_NAMES.index(label)
        declared = cls if cls != classify(size, policy) else None
        flows.append(Flow(fid, src, dst, size, cls, arrival, assign_priority(cls, policy),
                          declared=declared))
    return flows


def read_flow_table(path: str | os.PathLike, policy: IsolationPolicy | None = None) -> list[Flow]:
    with open(path) as fh:
        return parse_flow_table(fh.read(), policy)


def offered_load_bps(flows: list[Flow], cls: int, horizon_ps: int) -> float:
    total = sum(f.size for f in flows if f.cls == cls)
    return total * 8e12 / horizon_ps
