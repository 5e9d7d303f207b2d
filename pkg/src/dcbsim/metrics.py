"""Run-time collectors and the end-of-run report.

The collectors are plain counters and append-only lists that the fabric
pokes directly from its hot paths. :meth:`Collector.report` freezes them
into a :class:`MetricsReport`; :func:`write_outputs` writes the CSV/JSON
files.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

from .frame import CLASS_NAMES, ELEPHANT, MICE, PAUSE

PS_PER_US = 1_000_000
PS_PER_S = 10**12

FCT_COLUMNS = ("flow_id", "class", "size_bytes", "arrival_ns", "complete_ns", "fct_us")
THROUGHPUT_COLUMNS = ("bin_start_us", "link", "bits_per_s")
QUEUE_COLUMNS = ("t_us", "switch", "class", "bytes")
PAUSE_COLUMNS = ("t_us", "switch", "priority", "kind")
FB_COLUMNS = ("t_us", "flow", "fb_raw", "fb_quant", "mice_share")


def occupancy_share_at_trigger(class_bytes, cls: int) -> float | None:
    """Fraction of a queue held by ``cls``; None for an empty queue."""
    total = sum(class_bytes)
    if total <= 0:
        return None
    return class_bytes[cls] / total


def percentile(values: list[float], q: float) -> float:
    """Nearest-rank percentile (q in [0, 100])."""
    if not values:
        return float("nan")
    xs = sorted(values)
    k = max(1, math.ceil(q / 100 * len(xs)))
    return xs[k - 1]


class LinkMonitor:
    """Busy time of one egress port, per class, in fixed bins."""

    def __init__(self, label: str, capacity_bps: float, bin_ps: int, horizon_ps: int):
        self.label = label
        self.capacity = capacity_bps
        self.bin_ps = bin_ps
        nbins = -(-horizon_ps // bin_ps)
        self.horizon = horizon_ps
        self.busy = [[0] * nbins, [0] * nbins]
        self.tx_bytes = [0, 0]

    def record(self, start: int, duration: int, cls: int, size: int) -> None:
        self.tx_bytes[cls] += size
        end = min(start + duration, self.horizon)
        busy = self.busy[cls]
        bin_ps = self.bin_ps
        t = start
        while t < end:
            b = t // bin_ps
            stop = min(end, (b + 1) * bin_ps)
            busy[b] += stop - t
            t = stop

    def busy_between(self, t0: int, t1: int, cls: int | None = None) -> int:
        classes = (MICE, ELEPHANT) if cls is None else (cls,)
        total = 0
        b0, b1 = t0 // self.bin_ps, -(-t1 // self.bin_ps)
        for c in classes:
            total += sum(self.busy[c][b0:b1])
        return total

    def utilization(self, t0: int, t1: int) -> float:
        if t1 <= t0:
            return 0.0
        return min(1.0, self.busy_between(t0, t1) / (t1 - t0))

    def bins(self) -> list[tuple[int, float, float]]:
        """(bin_start_ps, mice_bps, elephant_bps) per bin."""
        out = []
        for b in range(len(self.busy[0])):
            width = min(self.bin_ps, self.horizon - b * self.bin_ps)
            out.append((b * self.bin_ps,
                        self.busy[MICE][b] / width * self.capacity,
                        self.busy[ELEPHANT][b] / width * self.capacity))
        return out


class Collector:
    def __init__(self, horizon_ps: int, warmup_ps: int = 0, bin_ps: int = 100 * PS_PER_US,
                 queue_sample_ps: int = 10 * PS_PER_US):
        if not 0 <= warmup_ps < horizon_ps:
            raise ValueError("warm-up must be shorter than the horizon")
        self.horizon = horizon_ps
        self.warmup = warmup_ps
        self.bin_ps = bin_ps
        self.queue_sample_ps = queue_sample_ps
        self.injected = [0, 0]
        self.injected_frames = [0, 0]
        self.injected_frames_window = 0
        self.delivered = [0, 0]
        self.dropped = [0, 0]
        self.dropped_frames = [0, 0]
        self.dropped_frames_window = 0
        self.in_flight = [0, 0]
        self.flows: dict[int, object] = {}
        self.completions: dict[int, int] = {}
        self.pause_log: list[tuple[int, str, int, int]] = []
        self.pause_share: list[float] = []
        self.fb_log: list[tuple[int, int, float, int, float, int]] = []
        self.queue_log: list[tuple[int, str, str, int]] = []
        self.monitors: dict[str, LinkMonitor] = {}
        self.bottleneck: str | None = None
        self.groups: dict[str, list[str]] = {}
        self.retransmits = 0
        self.timeouts = 0
        self._report: MetricsReport | None = None

    # -------------------------------------------------------------- recording
    def monitor(self, label: str, capacity_bps: float) -> LinkMonitor:
        mon = LinkMonitor(label, capacity_bps, self.bin_ps, self.horizon)
        self.monitors[label] = mon
        return mon

    def flow_arrived(self, flow) -> None:
        self.flows[flow.id] = flow

    def flow_done(self, flow, now: int) -> None:
        if flow.id not in self.completions:
            self.completions[flow.id] = now

    def inject(self, frame, now: int) -> None:
        c = frame.cls
        self.injected[c] += frame.size
        self.injected_frames[c] += 1
        if now >= self.warmup:
            self.injected_frames_window += 1

    def drop(self, node: str, frame, now: int) -> None:
        c = frame.cls
        self.dropped[c] += frame.size
        self.dropped_frames[c] += 1
        if now >= self.warmup:
            self.dropped_frames_window += 1

    def pfc_emitted(self, now: int, node: str, priority: int, kind, class_bytes) -> None:
        self.pause_log.append((now, node, priority, int(kind)))
        if kind == PAUSE:
            share = occupancy_share_at_trigger(class_bytes, ELEPHANT)
            if share is not None and now >= self.warmup:
                self.pause_share.append(share)

    def cnm_emitted(self, now: int, flow_id: int, fb_raw: float, fb_quant: int,
                    class_bytes, flow_cls: int) -> None:
        share = occupancy_share_at_trigger(class_bytes, MICE)
        self.fb_log.append((now, flow_id, fb_raw, fb_quant,
                            float("nan") if share is None else share, flow_cls))

    def sample_queues(self, now: int, switches, egress_ports) -> None:
        log = self.queue_log
        for sw in switches:
            mice = elephant = 0
            for per_port in sw.ingress:
                for iq in per_port:
                    if iq is not None:
                        mice += iq.class_bytes[MICE]
                        elephant += iq.class_bytes[ELEPHANT]
            log.append((now, sw.name, "all", mice + elephant))
            log.append((now, sw.name, "mice", mice))
            log.append((now, sw.name, "elephant", elephant))
        for label, port in egress_ports:
            mice = sum(cb[MICE] for cb in port.class_bytes)
            elephant = sum(cb[ELEPHANT] for cb in port.class_bytes)
            log.append((now, label, "all", mice + elephant))
            log.append((now, label, "mice", mice))
            log.append((now, label, "elephant", elephant))

    # ----------------------------------------------------------------- report
    def report(self, network=None) -> "MetricsReport":
        if self._report is not None:
            return self._report
        w0, w1 = self.warmup, self.horizon
        fct_rows = []
        mice_fct = []
        mice_incomplete = 0
        for fid in sorted(self.flows):
            flow = self.flows[fid]
            done = self.completions.get(fid)
            if done is not None:
                fct_us = (done - flow.arrival_ps) / PS_PER_US
                fct_rows.append((fid, CLASS_NAMES[flow.cls], flow.size, flow.arrival_ns,
                                 done // 1000, fct_us))
            if flow.cls == MICE and w0 <= flow.arrival_ps < w1:
                if done is None:
                    mice_incomplete += 1
                else:
                    mice_fct.append((done - flow.arrival_ps) / PS_PER_US)

        resident = [0, 0]
        if network is not None:
            resident = network.resident_bytes()
        resident = [resident[c] + self.in_flight[c] for c in (MICE, ELEPHANT)]

        window_fb = [r for r in self.fb_log if r[0] >= w0]
        fb_quant = [r[3] for r in window_fb]
        fb_eleph = [r[3] for r in window_fb if r[5] == ELEPHANT]
        shares = [r[4] for r in window_fb if not math.isnan(r[4])]

        pauses: dict[str, int] = {}
        pauses_window = 0
        for t, node, prio, kind in self.pause_log:
            if kind == int(PAUSE):
                key = f"{node}/p{prio}"
                pauses[key] = pauses.get(key, 0) + 1
                if t >= w0:
                    pauses_window += 1

        utilization = {label: mon.utilization(w0, w1) for label, mon in self.monitors.items()}
        group_util = {name: sum(utilization[l] for l in labels) / len(labels)
                      for name, labels in self.groups.items() if labels}
        bottleneck_util = utilization.get(self.bottleneck, float("nan")) if self.bottleneck else float("nan")

        throughput = []
        for label, mon in self.monitors.items():
            for start, mice_bps, eleph_bps in mon.bins():
                throughput.append((start / PS_PER_US, label, mice_bps + eleph_bps))

        dropped_window = self.dropped_frames_window
        self._report = MetricsReport(
            horizon_us=w1 / PS_PER_US,
            warmup_us=w0 / PS_PER_US,
            mice_fct_mean_us=sum(mice_fct) / len(mice_fct) if mice_fct else float("nan"),
            mice_fct_p50_us=percentile(mice_fct, 50),
            mice_fct_p99_us=percentile(mice_fct, 99),
            mice_completed=len(mice_fct),
            mice_incomplete=mice_incomplete,
            flows_total=len(self.flows),
            utilization=utilization,
            group_utilization=group_util,
            bottleneck=self.bottleneck or "",
            bottleneck_utilization=bottleneck_util,
            pause_counts=dict(sorted(pauses.items())),
            pause_total=sum(pauses.values()),
            pause_window=pauses_window,
            resume_total=sum(1 for r in self.pause_log if r[3] != int(PAUSE)),
            cnm_count=len(window_fb),
            fb_mean=sum(fb_quant) / len(fb_quant) if fb_quant else 0.0,
            fb_mean_elephant=sum(fb_eleph) / len(fb_eleph) if fb_eleph else 0.0,
            fb_raw_mean=sum(r[2] for r in window_fb) / len(window_fb) if window_fb else 0.0,
            mice_share_at_cnm=sum(shares) / len(shares) if shares else float("nan"),
            elephant_share_at_pause=(sum(self.pause_share) / len(self.pause_share)
                                     if self.pause_share else float("nan")),
            injected_bytes=tuple(self.injected),
            delivered_bytes=tuple(self.delivered),
            dropped_bytes=tuple(self.dropped),
            resident_bytes=tuple(resident),
            injected_frames=tuple(self.injected_frames),
            dropped_frames=tuple(self.dropped_frames),
            drop_ratio=(sum(self.dropped_frames) / sum(self.injected_frames)
                        if sum(self.injected_frames) else 0.0),
            drop_ratio_window=(dropped_window / self.injected_frames_window
                               if self.injected_frames_window else 0.0),
            retransmits=self.retransmits,
            timeouts=self.timeouts,
            fct_rows=tuple(fct_rows),
            throughput_rows=tuple(throughput),
            queue_rows=tuple(self.queue_log),
            pause_rows=tuple(self.pause_log),
            fb_rows=tuple(r[:5] for r in self.fb_log),
        )
        return self._report


@dataclass(frozen=True)
class MetricsReport:
    horizon_us: float
    warmup_us: float
    mice_fct_mean_us: float
    mice_fct_p50_us: float
    mice_fct_p99_us: float
    mice_completed: int
    mice_incomplete: int
    flows_total: int
    utilization: dict
    group_utilization: dict
    bottleneck: str
    bottleneck_utilization: float
    pause_counts: dict
    pause_total: int
    pause_window: int
    resume_total: int
    cnm_count: int
    fb_mean: float
    fb_mean_elephant: float
    fb_raw_mean: float
    mice_share_at_cnm: float
    elephant_share_at_pause: float
    injected_bytes: tuple
    delivered_bytes: tuple
    dropped_bytes: tuple
    resident_bytes: tuple
    injected_frames: tuple
    dropped_frames: tuple
    drop_ratio: float              # whole run, data frames
    drop_ratio_window: float       # measurement window only
    retransmits: int
    timeouts: int
    fct_rows: tuple = field(repr=False)
    throughput_rows: tuple = field(repr=False)
    queue_rows: tuple = field(repr=False)
    pause_rows: tuple = field(repr=False)
    fb_rows: tuple = field(repr=False)

    @property
    def conserved(self) -> bool:
        return all(self.injected_bytes[c] == self.delivered_bytes[c] + self.dropped_bytes[c]
                   + self.resident_bytes[c] for c in (MICE, ELEPHANT))

    def summary(self) -> dict:
        out = {}
        for name in self.__dataclass_fields__:
            if name.endswith("_rows"):
                continue
            value = getattr(self, name)
            if isinstance(value, tuple):
                value = dict(zip(CLASS_NAMES, value))
            out[name] = _clean(value)
        out["conserved"] = self.conserved
        return out


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    return value


def write_outputs(report: MetricsReport, out_dir: str | os.PathLike, extra: dict | None = None) -> None:
    os.makedirs(out_dir, exist_ok=True)

    def table(name, header, rows, fmt):
        with open(os.path.join(out_dir, name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow(fmt(row))

    table("fct.csv", FCT_COLUMNS, report.fct_rows,
          lambda r: (r[0], r[1], r[2], r[3], r[4], f"{r[5]:.4f}"))
    table("throughput.csv", THROUGHPUT_COLUMNS, report.throughput_rows,
          lambda r: (f"{r[0]:g}", r[1], f"{r[2]:.6g}"))
    table("queues.csv", QUEUE_COLUMNS, report.queue_rows,
          lambda r: (f"{r[0] / PS_PER_US:g}", r[1], r[2], r[3]))
    table("pauses.csv", PAUSE_COLUMNS, report.pause_rows,
          lambda r: (f"{r[0] / PS_PER_US:.6f}", r[1], r[2], "PAUSE" if r[3] == int(PAUSE) else "RESUME"))
    table("fb.csv", FB_COLUMNS, report.fb_rows,
          lambda r: (f"{r[0] / PS_PER_US:.6f}", r[1], f"{r[2]:.1f}", r[3],
                     "" if math.isnan(r[4]) else f"{r[4]:.4f}"))
    summary = report.summary()
    if extra:
        summary.update(extra)
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
