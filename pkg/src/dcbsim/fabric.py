"""Leaf-spine topology and the packet data path.

Switches account buffered DATA bytes against static per-(ingress port,
priority) partitions. PFC, QCN sampling and ECN marking all look at these
partitions. Frames wait in per-priority FIFOs at the egress port, served by
strict priority or by deficit round robin (ETS). Control frames jump every
data queue and are never halted.

Hosts have unbounded send buffers. Their NIC serves flows round robin within
a priority and strictly across priorities, stalling a priority while paused.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field

from .frame import (ACK, CNM, DATA, ELEPHANT, MICE, MTU, NUM_PRIORITIES, PAUSE, RESUME,
                    Frame)
from .pfc import PauseState, on_occupancy_fall, on_occupancy_rise, on_pause_received
from .qcn import CpState, QcnConfig, RpState, TokenBucket, cp_sample, rp_increase, rp_on_cnm
from .traffic import Flow, IsolationPolicy, assign_priority, class_at_offset
from .transport import DctcpState, Reassembly, TcpState, TransportConfig, ecn_mark_on_enqueue

PS_PER_US = 1_000_000
PS_PER_S = 10**12

STRICT = "strict"
ETS = "ets"


# ------------------------------------------------------------------ topology

@dataclass(frozen=True)
class Link:
    a: tuple[str, int]
    b: tuple[str, int]
    capacity_bps: float = 10e9
    prop_delay_ps: int = 2 * PS_PER_US

    def serialization_ps(self, size: int) -> int:
        return round(size * 8 * PS_PER_S / self.capacity_bps)


def ecmp_hash(flow_id: int, ways: int) -> int:
    """Static path choice for a flow (32-bit multiplicative hash)."""
    h = (flow_id * 0x9E3779B1 + 0x7F4A7C15) & 0xFFFFFFFF
    h ^= h >> 15
    h = (h * 0x2C1B3C6D) & 0xFFFFFFFF
    h ^= h >> 12
    return h % ways


class Topology:
    """Hosts 0..H-1; leaf ``l`` owns hosts l*hpl .. (l+1)*hpl - 1.

    Leaf ports 0..hpl-1 face hosts, ports hpl.. face spines. Spine port ``l``
    faces leaf ``l``. Every host has a single port 0.
    """

    def __init__(self, leaf_count: int, spine_count: int, hosts_per_leaf: int,
                 capacity_bps: float = 10e9, prop_delay_ps: int = 2 * PS_PER_US):
        if min(leaf_count, spine_count, hosts_per_leaf) < 1:
            raise ValueError("leaf, spine and host counts must all be >= 1")
        if capacity_bps <= 0 or prop_delay_ps < 0:
            raise ValueError("capacity must be positive and propagation delay >= 0")
        self.leaf_count = leaf_count
        self.spine_count = spine_count
        self.hosts_per_leaf = hosts_per_leaf
        self.capacity_bps = capacity_bps
        self.prop_delay_ps = prop_delay_ps
        self.host_count = leaf_count * hosts_per_leaf
        links = []
        for h in range(self.host_count):
            links.append(Link((host_name(h), 0), (leaf_name(h // hosts_per_leaf), h % hosts_per_leaf),
                              capacity_bps, prop_delay_ps))
        for l in range(leaf_count):
            for s in range(spine_count):
                links.append(Link((leaf_name(l), hosts_per_leaf + s), (spine_name(s), l),
                                  capacity_bps, prop_delay_ps))
        self.links = tuple(links)

    def hosts_under(self, leaf: int) -> list[int]:
        hpl = self.hosts_per_leaf
        return list(range(leaf * hpl, (leaf + 1) * hpl))

    def leaf_of(self, host: int) -> int:
        return host // self.hosts_per_leaf

    def uplink_port(self, spine: int) -> int:
        return self.hosts_per_leaf + spine

    def leaf_next_port(self, leaf: int, flow_id: int, dst: int) -> int:
        if dst // self.hosts_per_leaf == leaf:
            return dst % self.hosts_per_leaf
        return self.hosts_per_leaf + ecmp_hash(flow_id, self.spine_count)

    def spine_next_port(self, flow_id: int, dst: int) -> int:
        return dst // self.hosts_per_leaf

    def path(self, src: int, dst: int, flow_id: int = 0) -> list[str]:
        """Device names visited from ``src`` to ``dst``."""
        ls, ld = self.leaf_of(src), self.leaf_of(dst)
        if ls == ld:
            return [host_name(src), leaf_name(ls), host_name(dst)]
        s = ecmp_hash(flow_id, self.spine_count)
        return [host_name(src), leaf_name(ls), spine_name(s), leaf_name(ld), host_name(dst)]

    @property
    def devices(self) -> list[str]:
        return ([host_name(h) for h in range(self.host_count)]
                + [leaf_name(l) for l in range(self.leaf_count)]
                + [spine_name(s) for s in range(self.spine_count)])


def host_name(h: int) -> str:
    return f"h{h}"


def leaf_name(l: int) -> str:
    return f"leaf{l}"


def spine_name(s: int) -> str:
    return f"spine{s}"


def build_leaf_spine(leaf_count: int, spine_count: int, hosts_per_leaf: int,
                     capacity_bps: float = 10e9, prop_delay_ps: int = 2 * PS_PER_US) -> Topology:
    return Topology(leaf_count, spine_count, hosts_per_leaf, capacity_bps, prop_delay_ps)


# ---------------------------------------------------------- per-priority plan

@dataclass
class PriorityPlan:
    """How one priority class is treated everywhere in the fabric."""

    priority: int
    partition: int                  # bytes per ingress port
    pfc: bool = False
    qcn: bool = False
    ecn: bool = False
    weight: float = 1.0             # ETS share


@dataclass
class FabricConfig:
    plans: list[PriorityPlan]
    scheduler: str = STRICT
    ets_quantum: int = 10 * MTU
    K1: int = 25057
    K2: int = 25057 // 2
    qcn: QcnConfig = field(default_factory=QcnConfig)
    transport: TransportConfig = field(default_factory=TransportConfig)
    policy: IsolationPolicy = field(default_factory=IsolationPolicy)
    seed: int = 1


# ------------------------------------------------------------ switch buffers

class IngressQueue:
    __slots__ = ("port", "priority", "occupancy", "capacity", "pfc_enabled", "K1", "K2",
                 "paused_upstream", "pause_sent", "resume_sent", "class_bytes", "drops",
                 "cp", "ecn_threshold", "marked", "enqueued", "peak")

    def __init__(self, port: int, priority: int, capacity: int, pfc_enabled: bool = False,
                 K1: int = 25057, K2: int = 25057 // 2):
        if pfc_enabled and not 0 <= K2 < K1 < capacity:
            raise ValueError(f"need K2 < K1 < capacity, got {K2}, {K1}, {capacity}")
        self.port = port
        self.priority = priority
        self.occupancy = 0
        self.capacity = capacity
        self.pfc_enabled = pfc_enabled
        self.K1 = K1
        self.K2 = K2
        self.paused_upstream = False
        self.pause_sent = 0
        self.resume_sent = 0
        self.class_bytes = [0, 0]
        self.drops = 0
        self.cp: CpState | None = None
        self.ecn_threshold = 0
        self.marked = 0
        self.enqueued = 0
        self.peak = 0

    def admit(self, frame: Frame) -> bool:
        """Account ``frame``; False (and nothing changes) when it does not fit."""
        size = frame.size
        if self.occupancy + size > self.capacity:
            self.drops += 1
            return False
        self.occupancy += size
        self.class_bytes[frame.cls] += size
        if self.occupancy > self.peak:
            self.peak = self.occupancy
        return True

    def release(self, frame: Frame) -> None:
        self.occupancy -= frame.size
        self.class_bytes[frame.cls] -= frame.size


# --------------------------------------------------------------- egress side

class EgressPort:
    """Transmit side of one port: control FIFO, per-priority data FIFOs,
    the scheduler and the serializer."""

    def __init__(self, net: "Network", node, index: int, link: Link):
        self.net = net
        self.sim = net.sim
        self.node = node
        self.index = index
        self.link = link
        self.prop = link.prop_delay_ps
        self.ps_per_byte = 8 * PS_PER_S / link.capacity_bps
        self._ser: dict[int, int] = {}
        self.peer = None
        self.peer_port = -1
        self.ctrl: deque[Frame] = deque()
        self.queues = [deque() for _ in range(NUM_PRIORITIES)]
        self.qbytes = [0] * NUM_PRIORITIES
        self.class_bytes = [[0, 0] for _ in range(NUM_PRIORITIES)]
        self.pause = [PauseState() for _ in range(NUM_PRIORITIES)]
        self.halted = [False] * NUM_PRIORITIES
        self.busy = False
        self.monitor = None
        self.tx_frames = 0
        self.tx_bytes = 0
        # strict: highest index first; ETS: DRR over positive weights
        self.prios = sorted((p.priority for p in net.cfg.plans), reverse=True)
        self.ets = net.cfg.scheduler == ETS
        self.quantum = [0] * NUM_PRIORITIES
        self.deficit = [0] * NUM_PRIORITIES
        self.drr = []
        self.leftover = []
        if self.ets:
            for plan in net.cfg.plans:
                q = round(plan.weight * net.cfg.ets_quantum)
                self.quantum[plan.priority] = q
                (self.drr if q > 0 else self.leftover).append(plan.priority)
            self.drr.sort(reverse=True)
            self.leftover.sort(reverse=True)
        self.rr = 0
        self.fresh = True

    def serialization(self, size: int) -> int:
        t = self._ser.get(size)
        if t is None:
            t = self._ser[size] = round(size * self.ps_per_byte)
        return t

    # -- queueing
    def send_ctrl(self, frame: Frame) -> None:
        self.ctrl.append(frame)
        if not self.busy:
            self._start()

    def enqueue(self, frame: Frame) -> None:
        p = frame.priority
        self.queues[p].append(frame)
        self.qbytes[p] += frame.size
        self.class_bytes[p][frame.cls] += frame.size
        if not self.busy:
            self._start()

    def apply_pause(self, kind, priority: int) -> None:
        if on_pause_received(self.pause[priority], kind):
            self.halted[priority] = kind == PAUSE
            if kind == RESUME and not self.busy:
                self._start()

    def kick(self) -> None:
        if not self.busy:
            self._start()

    # -- scheduling
    def _pick(self) -> Frame | None:
        if self.ets:
            frame = self._pick_drr()
        else:
            frame = None
            queues, halted = self.queues, self.halted
            for p in self.prios:
                if queues[p] and not halted[p]:
                    frame = queues[p].popleft()
                    break
        if frame is not None:
            p = frame.priority
            self.qbytes[p] -= frame.size
            self.class_bytes[p][frame.cls] -= frame.size
        return frame

    def _pick_drr(self) -> Frame | None:
        queues, halted, deficit = self.queues, self.halted, self.deficit
        order = self.drr
        if any(queues[p] and not halted[p] for p in order):
            n = len(order)
            while True:
                p = order[self.rr]
                q = queues[p]
                if q and not halted[p]:
                    if self.fresh:
                        deficit[p] += self.quantum[p]
                        self.fresh = False
                    if q[0].size <= deficit[p]:
                        frame = q.popleft()
                        deficit[p] -= frame.size
                        if not q:
                            deficit[p] = 0
                        return frame
                elif not q:
                    deficit[p] = 0
                self.rr = (self.rr + 1) % n
                self.fresh = True
        for p in self.leftover:
            if queues[p] and not halted[p]:
                return queues[p].popleft()
        return None

    # -- serialization
    def _start(self) -> None:
        if self.ctrl:
            frame = self.ctrl.popleft()
        else:
            frame = self._pick()
            if frame is None:
                return
            self.node.on_dequeue(frame)
        self._transmit(frame)

    def _transmit(self, frame: Frame) -> None:
        now = self.sim.now
        ser = self.serialization(frame.size)
        self.busy = True
        self.tx_frames += 1
        self.tx_bytes += frame.size
        if frame.kind == DATA:
            self.net.collector.in_flight[frame.cls] += frame.size
            if self.monitor is not None:
                self.monitor.record(now, ser, frame.cls, frame.size)
        self.sim.schedule(ser, self._done)
        self.sim.schedule(ser + self.prop, self.peer.receive, frame, self.peer_port)

    def _done(self) -> None:
        self.busy = False
        self._start()

    @property
    def backlog(self) -> int:
        return sum(self.qbytes)


# ------------------------------------------------------------------- switches

class Switch:
    def __init__(self, net: "Network", name: str, kind: str, index: int, port_count: int):
        self.net = net
        self.sim = net.sim
        self.name = name
        self.kind = kind
        self.index = index
        self.ports: list[EgressPort] = []
        self.ingress: list[list[IngressQueue | None]] = []
        self.port_count = port_count
        self.drops = [0, 0]

    def _build_ingress(self, cfg: FabricConfig, rng: random.Random) -> None:
        for port in range(self.port_count):
            row: list[IngressQueue | None] = [None] * NUM_PRIORITIES
            for plan in cfg.plans:
                iq = IngressQueue(port, plan.priority, plan.partition, plan.pfc, cfg.K1, cfg.K2)
                if plan.qcn:
                    q = cfg.qcn
                    iq.cp = CpState(q.target(plan.partition), q.w, q.sample_bytes, q.fb_max,
                                    q.sample_jitter, random.Random(rng.getrandbits(64)),
                                    q.variable_sampling)
                if plan.ecn:
                    iq.ecn_threshold = cfg.transport.ecn_threshold
                row[plan.priority] = iq
            self.ingress.append(row)

    def route(self, flow_id: int, dst: int) -> int:
        topo = self.net.topo
        if self.kind == "leaf":
            return topo.leaf_next_port(self.index, flow_id, dst)
        return topo.spine_next_port(flow_id, dst)

    def receive(self, frame: Frame, port: int) -> None:
        kind = frame.kind
        if kind == DATA:
            self.net.collector.in_flight[frame.cls] -= frame.size
            self._ingress(frame, port)
        elif kind == PAUSE or kind == RESUME:
            self.ports[port].apply_pause(kind, frame.priority)
        else:
            self.ports[self.route(frame.flow_id, frame.dst)].send_ctrl(frame)

    def _ingress(self, frame: Frame, port: int) -> None:
        iq = self.ingress[port][frame.priority]
        if iq is None:
            raise RuntimeError(f"{self.name}: no queue configured for priority {frame.priority}")
        net = self.net
        now = self.sim.now
        if not iq.admit(frame):
            self.drops[frame.cls] += 1
            net.collector.drop(self.name, frame, now)
            return
        frame.in_port = port
        iq.enqueued += 1
        if iq.ecn_threshold:
            ecn_mark_on_enqueue(iq.occupancy - frame.size, frame, iq.ecn_threshold)
            iq.marked += frame.ecn
        if iq.pfc_enabled:
            pause = on_occupancy_rise(iq)
            if pause is not None:
                self.ports[port].send_ctrl(pause)
                net.collector.pfc_emitted(now, self.name, iq.priority, PAUSE, iq.class_bytes)
        cp = iq.cp
        if cp is not None and cp.on_arrival(frame.size):
            cnm = cp_sample(iq.occupancy, cp, frame.flow_id, self.index)
            if cnm is not None:
                msg = Frame.control(CNM, frame.priority, frame.flow_id, dst=frame.src)
                msg.fb = cnm.fb
                net.collector.cnm_emitted(now, frame.flow_id, cnm.fb_raw, cnm.fb,
                                          iq.class_bytes, frame.cls)
                self.ports[self.route(frame.flow_id, frame.src)].send_ctrl(msg)
        self.ports[self.route(frame.flow_id, frame.dst)].enqueue(frame)

    def on_dequeue(self, frame: Frame) -> None:
        iq = self.ingress[frame.in_port][frame.priority]
        iq.release(frame)
        if iq.paused_upstream:
            resume = on_occupancy_fall(iq)
            if resume is not None:
                self.ports[iq.port].send_ctrl(resume)
                self.net.collector.pfc_emitted(self.sim.now, self.name, iq.priority, RESUME,
                                               iq.class_bytes)

    def resident(self) -> list[int]:
        out = [0, 0]
        for row in self.ingress:
            for iq in row:
                if iq is not None:
                    out[MICE] += iq.class_bytes[MICE]
                    out[ELEPHANT] += iq.class_bytes[ELEPHANT]
        return out


# ---------------------------------------------------------------------- hosts

class SenderFlow:
    """Send-side state of one flow at its source host."""

    __slots__ = ("flow", "host", "size", "next_off", "tcp", "rp", "bucket", "timer_ev",
                 "rto_ev", "rtx", "prio", "cls", "finished", "sent_bytes")

    def __init__(self, host: "Host", flow: Flow, transport: str):
        self.flow = flow
        self.host = host
        self.size = flow.size
        self.next_off = 0
        cfg = host.net.cfg.transport
        if transport == "tcp":
            self.tcp = TcpState.from_config(cfg)
        elif transport == "dctcp":
            self.tcp = DctcpState.from_config(cfg)
        else:
            self.tcp = None
        self.rp: RpState | None = None
        self.bucket: TokenBucket | None = None
        self.timer_ev = None
        self.rto_ev = None
        self.rtx = False
        self.finished = False
        self.sent_bytes = 0
        self._classify(0)

    def _classify(self, offset: int) -> None:
        policy = self.host.net.cfg.policy
        self.cls = class_at_offset(self.flow, offset, policy)
        self.prio = assign_priority(self.cls, policy) if not self.flow.size_known else self.flow.priority

    def ready_at(self, now: int) -> int | None:
        """Time the next frame may go out, or None when blocked or done."""
        tcp = self.tcp
        if tcp is None:
            if self.next_off >= self.size:
                return None
            seg = min(MTU, self.size - self.next_off)
        elif self.rtx:
            seg = min(MTU, self.size - tcp.snd_una)
        else:
            if tcp.snd_nxt >= self.size:
                return None
            seg = min(MTU, self.size - tcp.snd_nxt)
            if not tcp.window_allows(seg):
                return None
        if self.bucket is None:
            return now
        return self.bucket.ready_at(seg, now)

    def next_frame(self, now: int) -> Frame:
        tcp = self.tcp
        if tcp is None:
            seq = self.next_off
        elif self.rtx:
            seq = tcp.snd_una
            self.rtx = False
            self.host.net.collector.retransmits += 1
        else:
            seq = tcp.snd_nxt
            if seq < self.next_off:
                self.host.net.collector.retransmits += 1
        size = min(MTU, self.size - seq)
        if not self.flow.size_known:
            self._classify(seq)
        f = self.flow
        frame = Frame(DATA, f.id, seq, size, self.prio, f.src, f.dst, self.cls)
        frame.ts = now
        if tcp is None:
            self.next_off = seq + size
        else:
            tcp.on_send(seq, size)
            if seq + size > self.next_off:
                self.next_off = seq + size
            if self.rto_ev is None or not self.rto_ev.pending:
                self._arm_rto()
        self.sent_bytes += size
        if self.bucket is not None:
            self.bucket.consume(size, now)
        if self.rp is not None and self.rp.on_bytes_sent(size):
            self.bucket.set_rate(self.rp.rc, now)
        return frame

    @property
    def done_sending(self) -> bool:
        if self.tcp is None:
            return self.next_off >= self.size
        return self.tcp.snd_una >= self.size

    # -- QCN reaction point
    def on_cnm(self, fb: int) -> None:
        net = self.host.net
        now = net.sim.now
        if self.rp is None:
            self.rp = RpState.from_config(net.cfg.qcn, net.topo.capacity_bps)
            self.bucket = TokenBucket(self.rp.rc, MTU, now)
        rp_on_cnm(self.rp, _Feedback(fb))
        self.bucket.set_rate(self.rp.rc, now)
        net.sim.cancel(self.timer_ev)
        self.timer_ev = net.sim.schedule(self.host.rp_timer, self._on_timer)

    def _on_timer(self) -> None:
        if self.finished:
            return
        net = self.host.net
        rp_increase(self.rp, "timer")
        self.bucket.set_rate(self.rp.rc, net.sim.now)
        self.timer_ev = net.sim.schedule(self.host.rp_timer, self._on_timer)
        self.host.nic.kick()

    # -- window transport
    def _arm_rto(self) -> None:
        sim = self.host.net.sim
        sim.cancel(self.rto_ev)
        self.rto_ev = sim.schedule(self.tcp.current_rto, self._on_rto)

    def _on_rto(self) -> None:
        if self.finished:
            return
        self.tcp.on_timeout()
        self.rtx = False
        self.host.net.collector.timeouts += 1
        self.host.activate(self)
        self._arm_rto()

    def on_ack(self, frame: Frame) -> None:
        tcp = self.tcp
        if tcp is None or self.finished:
            return
        net = self.host.net
        before = tcp.snd_una
        tcp.rtt_sample(net.sim.now - frame.ts)
        if tcp.on_ack(frame.seq, frame.ece):
            self.rtx = True
        if tcp.snd_una >= self.size:
            self.finished = True
            net.sim.cancel(self.rto_ev)
            net.sim.cancel(self.timer_ev)
            return
        if tcp.snd_una > before:
            self._arm_rto()
        self.host.activate(self)


class _Feedback:
    __slots__ = ("fb",)

    def __init__(self, fb: int):
        self.fb = fb


class HostNic(EgressPort):
    def _start(self) -> None:
        if self.ctrl:
            frame = self.ctrl.popleft()
        else:
            frame = self.node.pick(self.halted)
            if frame is None:
                return
            self.net.collector.inject(frame, self.sim.now)
        self._transmit(frame)


class Host:
    def __init__(self, net: "Network", index: int):
        self.net = net
        self.sim = net.sim
        self.index = index
        self.name = host_name(index)
        self.nic: HostNic | None = None
        self.ports: list[EgressPort] = []
        self.active: list[SenderFlow] = []
        self.senders: dict[int, SenderFlow] = {}
        self.rx: dict[int, Reassembly] = {}
        self.wake_ev = None
        self.rp_timer = round(net.cfg.qcn.timer_us * PS_PER_US)

    # -- sending
    def start_flow(self, flow: Flow) -> None:
        transport = self.net.transport_for(flow)
        sf = SenderFlow(self, flow, transport)
        self.senders[flow.id] = sf
        self.activate(sf)

    def activate(self, sf: SenderFlow) -> None:
        if sf not in self.active:
            self.active.append(sf)
        self.nic.kick()

    def pick(self, halted) -> Frame | None:
        now = self.sim.now
        best = None
        best_i = -1
        earliest = None
        active = self.active
        i = 0
        while i < len(active):
            sf = active[i]
            if sf.finished or (sf.tcp is None and sf.next_off >= sf.size):
                active.pop(i)
                continue
            i += 1
            if halted[sf.prio]:
                continue
            t = sf.ready_at(now)
            if t is None:
                continue
            if t > now:
                if earliest is None or t < earliest:
                    earliest = t
                continue
            if best is None or sf.prio > best.prio:
                best, best_i = sf, i - 1
        if best is None:
            if earliest is not None:
                self._wake_at(earliest)
            return None
        frame = best.next_frame(now)
        active.append(active.pop(best_i))
        if best.tcp is None and best.next_off >= best.size:
            active.pop()
            best.finished = True
            self.sim.cancel(best.timer_ev)
        return frame

    def _wake_at(self, t: int) -> None:
        ev = self.wake_ev
        if ev is not None and ev.pending:
            if ev.fire_time <= t:
                return
            self.sim.cancel(ev)
        self.wake_ev = self.sim.schedule_at(t, self.nic.kick)

    def on_dequeue(self, frame: Frame) -> None:
        pass

    # -- receiving
    def receive(self, frame: Frame, port: int) -> None:
        kind = frame.kind
        if kind == DATA:
            self._deliver(frame)
        elif kind == ACK:
            sf = self.senders.get(frame.flow_id)
            if sf is not None:
                sf.on_ack(frame)
        elif kind == CNM:
            sf = self.senders.get(frame.flow_id)
            if sf is not None and not sf.finished:
                sf.on_cnm(frame.fb)
        else:
            self.nic.apply_pause(kind, frame.priority)

    def _deliver(self, frame: Frame) -> None:
        net = self.net
        coll = net.collector
        coll.in_flight[frame.cls] -= frame.size
        coll.delivered[frame.cls] += frame.size
        fid = frame.flow_id
        r = self.rx.get(fid)
        if r is None:
            r = self.rx[fid] = Reassembly()
        ack = r.on_segment(frame.seq, frame.size)
        flow = net.flows[fid]
        if ack >= flow.size and fid not in coll.completions:
            coll.flow_done(flow, self.sim.now)
        if net.transport_for(flow) != "none":
            msg = Frame.control(ACK, frame.priority, fid, src=self.index, dst=frame.src)
            msg.seq = ack
            msg.ece = frame.ecn
            msg.ts = frame.ts
            self.nic.send_ctrl(msg)
        elif ack >= flow.size:
            del self.rx[fid]


# -------------------------------------------------------------------- network

class Network:
    """Runtime fabric: switches, hosts and wired ports for one simulation."""

    def __init__(self, sim, topo: Topology, cfg: FabricConfig, collector, flows: list[Flow]):
        self.sim = sim
        self.topo = topo
        self.cfg = cfg
        self.collector = collector
        self.flows = {f.id: f for f in flows}
        self._pending = sorted(flows, key=lambda f: (f.arrival_ps, f.id))
        self._next = 0
        self._transport = {MICE: "none", ELEPHANT: cfg.transport.kind}
        rng = random.Random(cfg.seed)
        self.hosts = [Host(self, h) for h in range(topo.host_count)]
        hpl = topo.hosts_per_leaf
        self.leaves = [Switch(self, leaf_name(l), "leaf", l, hpl + topo.spine_count)
                       for l in range(topo.leaf_count)]
        self.spines = [Switch(self, spine_name(s), "spine", s, topo.leaf_count)
                       for s in range(topo.spine_count)]
        self.switches = self.leaves + self.spines
        for sw in self.switches:
            sw.ports = [None] * sw.port_count
            sw._build_ingress(cfg, rng)
        nodes = {h.name: h for h in self.hosts}
        nodes.update({s.name: s for s in self.switches})
        self.nodes = nodes
        for link in topo.links:
            (an, ap), (bn, bp) = link.a, link.b
            a, b = nodes[an], nodes[bn]
            pa = self._make_port(a, ap, link)
            pb = self._make_port(b, bp, link)
            pa.peer, pa.peer_port = b, bp
            pb.peer, pb.peer_port = a, ap
        self.sampled_ports: list[tuple[str, EgressPort]] = []

    def _make_port(self, node, index: int, link: Link) -> EgressPort:
        if isinstance(node, Host):
            port = HostNic(self, node, index, link)
            node.nic = port
            node.ports = [port]
        else:
            port = EgressPort(self, node, index, link)
            node.ports[index] = port
        return port

    def transport_for(self, flow: Flow) -> str:
        return self._transport[flow.cls]

    def port(self, device: str, index: int) -> EgressPort:
        return self.nodes[device].ports[index]

    # -- flow arrivals
    def start(self) -> None:
        self._schedule_next_arrival()
        coll = self.collector
        if coll.queue_sample_ps > 0:
            self.sim.schedule_at(0, self._sample)

    def _schedule_next_arrival(self) -> None:
        if self._next < len(self._pending):
            f = self._pending[self._next]
            self.sim.schedule_at(max(f.arrival_ps, self.sim.now), self._arrive)

    def _arrive(self) -> None:
        now = self.sim.now
        pending = self._pending
        while self._next < len(pending) and pending[self._next].arrival_ps <= now:
            f = pending[self._next]
            self._next += 1
            self.collector.flow_arrived(f)
            self.hosts[f.src].start_flow(f)
        self._schedule_next_arrival()

    def _sample(self) -> None:
        coll = self.collector
        now = self.sim.now
        coll.sample_queues(now, self.switches, self.sampled_ports)
        nxt = now + coll.queue_sample_ps
        if nxt < coll.horizon:
            self.sim.schedule_at(nxt, self._sample)

    def resident_bytes(self) -> list[int]:
        out = [0, 0]
        for sw in self.switches:
            r = sw.resident()
            out[MICE] += r[MICE]
            out[ELEPHANT] += r[ELEPHANT]
        return out

    def pause_totals(self) -> dict[str, int]:
        out = {}
        for sw in self.switches:
            for row in sw.ingress:
                for iq in row:
                    if iq is not None and iq.pause_sent:
                        key = f"{sw.name}/p{iq.priority}"
                        out[key] = out.get(key, 0) + iq.pause_sent
        return out
