import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcbsim.engine import PS_PER_US, Simulator
from dcbsim.fabric import (ETS, STRICT, EgressPort, FabricConfig, IngressQueue, Link, PriorityPlan,
                           build_leaf_spine, ecmp_hash)
from dcbsim.frame import DATA, ELEPHANT, MICE, MTU, PAUSE, RESUME, CNM, Frame
from dcbsim.metrics import Collector

from conftest import run_text


class _Node:
    def __init__(self):
        self.dequeued = []

    def on_dequeue(self, frame):
        self.dequeued.append(frame)


class _Sink:
    def __init__(self, sim):
        self.sim = sim
        self.got = []

    def receive(self, frame, port):
        self.got.append((self.sim.now, frame))


class _Net:
    def __init__(self, plans, scheduler=STRICT, quantum=15000):
        self.sim = Simulator()
        self.cfg = FabricConfig(plans=plans, scheduler=scheduler, ets_quantum=quantum)
        self.collector = Collector(10**15)


def make_port(plans=None, scheduler=STRICT, prop_ps=0, quantum=15000):
    plans = plans or [PriorityPlan(0, 10**9), PriorityPlan(1, 10**9)]
    net = _Net(plans, scheduler, quantum)
    link = Link(("a", 0), ("b", 0), 10e9, prop_ps)
    port = EgressPort(net, _Node(), 0, link)
    port.peer, port.peer_port = _Sink(net.sim), 0
    return net, port


def data(prio, size=MTU, flow=0, cls=MICE):
    return Frame(DATA, flow, 0, size, prio, 0, 1, cls)


# ------------------------------------------------------------------ topology

def test_default_four_by_two_fabric():
    t = build_leaf_spine(4, 2, 4)
    assert t.host_count == 16
    assert len(t.links) == 16 + 4 * 2
    assert t.devices[-2:] == ["spine0", "spine1"]


def test_benchmark_fabric_has_144_servers():
    assert build_leaf_spine(18, 4, 8).host_count == 144


def test_degenerate_topologies():
    t = build_leaf_spine(1, 1, 2)
    assert t.path(0, 1) == ["h0", "leaf0", "h1"]
    t = build_leaf_spine(2, 1, 1)
    assert t.path(0, 1) == ["h0", "leaf0", "spine0", "leaf1", "h1"]


@pytest.mark.parametrize("counts", [(0, 1, 1), (1, 0, 1), (1, 1, 0)])
def test_zero_counts_rejected(counts):
    with pytest.raises(ValueError):
        build_leaf_spine(*counts)


def test_every_leaf_reaches_every_spine():
    t = build_leaf_spine(5, 3, 2)
    pairs = {(l.a[0], l.b[0]) for l in t.links if l.b[0].startswith("spine")}
    assert pairs == {(f"leaf{l}", f"spine{s}") for l in range(5) for s in range(3)}


def test_ecmp_is_static_and_in_range():
    for fid in range(500):
        assert ecmp_hash(fid, 4) == ecmp_hash(fid, 4)
        assert 0 <= ecmp_hash(fid, 4) < 4
    counts = [0, 0]
    for fid in range(10_000):
        counts[ecmp_hash(fid, 2)] += 1
    assert abs(counts[0] - counts[1]) < 500


# --------------------------------------------------------------- serializer

def test_two_kilobytes_take_1_64_us():
    link = Link(("a", 0), ("b", 0), 10e9, 0)
    assert link.serialization_ps(2048) == 1_638_400


def test_control_frame_arrival_time():
    net, port = make_port(prop_ps=PS_PER_US)
    port.send_ctrl(Frame.control(PAUSE, 0))
    net.sim.run_until(10 * PS_PER_US)
    (t, _), = port.peer.got
    assert t == 51_200 + PS_PER_US


def test_back_to_back_frames_never_overlap():
    net, port = make_port(prop_ps=2 * PS_PER_US)
    sizes = [MTU, 700, 64 + 1, MTU]
    for s in sizes:
        port.enqueue(data(0, s))
    net.sim.run_until(100 * PS_PER_US)
    times = [t for t, _ in port.peer.got]
    expected, t = [], 0
    for s in sizes:
        t += round(s * 8 * 100)       # 100 ps per bit at 10 Gbps
        expected.append(t + 2 * PS_PER_US)
    assert times == expected


# ------------------------------------------------------------- ingress side

def test_ingress_admit_and_overflow():
    q = IngressQueue(0, 0, 100 * 1024)
    assert q.admit(data(0, 1500))
    assert q.occupancy == 1500
    q.occupancy = q.capacity - 100
    assert not q.admit(data(0, 1500))
    assert q.occupancy == q.capacity - 100
    assert q.drops == 1


def test_ingress_rejects_inconsistent_thresholds():
    with pytest.raises(ValueError):
        IngressQueue(0, 0, 20_000, pfc_enabled=True, K1=25_057, K2=12_528)


# ---------------------------------------------------------------- scheduler

def test_strict_priority_serves_mice_first():
    net, port = make_port()
    port.busy = True                  # hold the line so both frames queue up
    port.enqueue(data(0, cls=ELEPHANT))
    port.enqueue(data(1, cls=MICE))
    assert port._pick().priority == 1
    assert port._pick().priority == 0
    assert port._pick() is None


def test_halted_class_is_skipped_but_control_is_not():
    net, port = make_port()
    port.apply_pause(PAUSE, 0)
    port.enqueue(data(0))
    port.send_ctrl(Frame.control(CNM, 0))
    net.sim.run_until(10 * PS_PER_US)
    assert [f.kind for _, f in port.peer.got] == [CNM]
    port.apply_pause(RESUME, 0)
    net.sim.run_until(20 * PS_PER_US)
    assert [f.kind for _, f in port.peer.got] == [CNM, DATA]


def _drr_oracle(weights, quantum, backlog):
    """Reference deficit round robin over always-backlogged classes."""
    served = {p: 0 for p in weights}
    deficit = {p: 0 for p in weights}
    queues = {p: list(sizes) for p, sizes in backlog.items()}
    order = sorted(weights, reverse=True)
    total = 0
    while total < 10**6:
        for p in order:
            deficit[p] += round(weights[p] * quantum)
            while queues[p] and queues[p][0] <= deficit[p] and total < 10**6:
                s = queues[p].pop(0)
                deficit[p] -= s
                served[p] += s
                total += s
    return served


def test_ets_even_split_matches_drr_oracle():
    rng = random.Random(11)
    backlog = {p: [rng.randint(64, MTU) for _ in range(3000)] for p in (0, 1)}
    oracle = _drr_oracle({0: 0.5, 1: 0.5}, 15000, backlog)
    net, port = make_port([PriorityPlan(0, 10**9, weight=0.5), PriorityPlan(1, 10**9, weight=0.5)],
                          scheduler=ETS)
    port.busy = True
    for p in (0, 1):
        for s in backlog[p]:
            port.enqueue(data(p, s))
    served = {0: 0, 1: 0}
    total = 0
    while total < 10**6:
        f = port._pick()
        served[f.priority] += f.size
        total += f.size
    for p in (0, 1):
        assert abs(served[p] - 500_000) <= MTU + 15000 * 0.5
        assert abs(served[p] - oracle[p]) <= MTU


def test_zero_weight_class_only_gets_leftovers():
    net, port = make_port([PriorityPlan(0, 10**9, weight=0.0), PriorityPlan(1, 10**9, weight=1.0)],
                          scheduler=ETS)
    port.busy = True
    for _ in range(5):
        port.enqueue(data(0))
        port.enqueue(data(1))
    order = [port._pick().priority for _ in range(10)]
    assert order == [1] * 5 + [0] * 5


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["data0", "data1", "pause0", "resume0", "pause1",
                                          "resume1", "ctrl", "tick"]),
                          st.integers(1, 5)), max_size=80),
       st.sampled_from([STRICT, ETS]))
def test_work_conservation_and_strict_dominance(ops, scheduler):
    net, port = make_port([PriorityPlan(0, 10**9, weight=0.3), PriorityPlan(1, 10**9, weight=0.7)],
                          scheduler=scheduler)
    picks = []
    orig = port._pick

    def checked_pick():
        waiting = {p for p in (0, 1) if port.queues[p] and not port.halted[p]}
        f = orig()
        if f is not None:
            picks.append(f.priority)
            assert f.priority in waiting
            if scheduler == STRICT:
                assert f.priority == max(waiting)
        else:
            assert not waiting
        return f

    port._pick = checked_pick
    for op, k in ops:
        if op.startswith("data"):
            for _ in range(k):
                port.enqueue(data(int(op[-1]), 100 * k))
        elif op.startswith("pause"):
            port.apply_pause(PAUSE, int(op[-1]))
        elif op.startswith("resume"):
            port.apply_pause(RESUME, int(op[-1]))
        elif op == "ctrl":
            port.send_ctrl(Frame.control(CNM, 0))
        else:
            net.sim.run_until(net.sim.now + k * PS_PER_US)
        if not port.busy:
            assert not port.ctrl
            assert all(not port.queues[p] or port.halted[p] for p in (0, 1))
    net.sim.run_until(net.sim.now + 10**9)
    for p in (0, 1):
        if not port.halted[p]:
            assert not port.queues[p]


# --------------------------------------------------------- whole-fabric runs

@pytest.mark.parametrize("text", [
    "",
    "[flow_control]\npfc.enabled = false",
    "[isolation]\nmode = isolated_strict",
    "[flow_control]\nqcn.enabled = false\ntransport.kind = tcp\n[isolation]\nmode = isolated_strict",
])
def test_byte_conservation_and_occupancy_bounds(text):
    r = run_text(text, horizon_ms=3)
    rep = r.report
    for c in (MICE, ELEPHANT):
        assert rep.injected_bytes[c] == rep.delivered_bytes[c] + rep.dropped_bytes[c] + rep.resident_bytes[c]
    for sw in r.network.switches:
        for row in sw.ingress:
            for iq in row:
                if iq is not None:
                    assert 0 <= iq.occupancy <= iq.capacity
                    assert iq.peak <= iq.capacity


def test_same_leaf_flow_stays_on_the_leaf():
    from dcbsim.traffic import Flow
    flows = [Flow(0, 0, 1, 30_000, MICE, 0)]
    r = run_text("", horizon_ms=1, flows=flows)
    assert r.network.port("leaf0", 1).tx_bytes == 30_000
    assert all(p.tx_bytes == 0 for s in r.network.spines for p in s.ports)
