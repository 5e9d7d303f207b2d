"""Quantized congestion notification.

Congestion point (a switch ingress partition): sample the queue every ~150 KB of
arrivals, compute ``Fb = Qoff + w * Qdelta`` and send a CNM to the source of
the sampled frame when Fb is positive.

Reaction point (sending host, one per flow): multiplicative decrease on CNM,
then five fast-recovery stages averaging toward the target rate, then active
increase of the target. Stages are clocked by a byte counter and a timer.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .frame import MTU

KB = 1024
PS_PER_S = 10**12


@dataclass
class QcnConfig:
    enabled: bool = True
    q_eq_fraction: float = 0.2
    q_eq: int = 0                     # bytes; 0 means q_eq_fraction of the class partition
    w: float = 2.0
    gd: float = 1 / 128
    sample_bytes: int = 150 * KB
    sample_jitter: float = 0.3
    variable_sampling: bool = False   # sample up to 10x more often as |Fb| grows
    fb_max: int = 63
    byte_counter: int = 150 * KB
    timer_us: float = 15_000.0
    fast_recovery_stages: int = 5
    r_ai_mbps: float = 5.0
    min_rate_mbps: float = 1.0

    def validate(self) -> None:
        if self.w <= 0:
            raise ValueError("qcn w must be positive")
        if not 0 < self.q_eq_fraction < 1 and self.q_eq <= 0:
            raise ValueError("qcn q_eq_fraction must be in (0, 1)")
        if self.q_eq < 0:
            raise ValueError("qcn q_eq must be >= 0")
        if not 0 < self.gd * self.fb_max < 1:
            raise ValueError("qcn gd * fb_max must be in (0, 1)")
        if not 0 <= self.sample_jitter < 1:
            raise ValueError("qcn sample_jitter must be in [0, 1)")
        if self.sample_bytes <= 0 or self.byte_counter <= 0 or self.timer_us <= 0:
            raise ValueError("qcn sample_bytes, byte_counter and timer_us must be positive")

    def target(self, partition: int) -> int:
        return self.q_eq if self.q_eq > 0 else max(1, int(self.q_eq_fraction * partition))


@dataclass
class Cnm:
    flow_id: int
    fb: int
    fb_raw: float = 0.0
    switch: int = -1


class CpState:
    """Sampling state of one congestion point (one ingress partition)."""

    def __init__(self, q_eq: int, w: float = 2.0, sample_interval: int = 150 * KB,
                 fb_max: int = 63, jitter: float = 0.3, rng: random.Random | None = None,
                 variable: bool = False):
        if w <= 0 or q_eq <= 0:
            raise ValueError("CP needs w > 0 and q_eq > 0")
        self.q_eq = q_eq
        self.w = w
        self.q_old = 0
        self.sample_interval = sample_interval
        self.fb_max = fb_max
        self.jitter = jitter
        self.rng = rng or random.Random(0)
        # largest |Fb| the 6-bit field can express, as in 802.1Qau
        self.quant_unit = q_eq * (2 * w + 1) / fb_max
        self.variable = variable
        self.severity = 0             # quantized Fb of the last sample, 0 if none sent
        self.arrived = 0
        self.next_sample: int | None = None
        self.samples = 0

    @property
    def interval(self) -> float:
        """Mean bytes between samples: the base interval, shrinking linearly
        to a tenth of it at the largest feedback when sampling is variable."""
        if not self.variable:
            return self.sample_interval
        return self.sample_interval / (1 + 9 * self.severity / self.fb_max)

    def _draw(self) -> int:
        if self.jitter == 0:
            return int(self.interval)
        lo = 1 - self.jitter
        return int(self.interval * (lo + 2 * self.jitter * self.rng.random()))

    def on_arrival(self, size: int) -> bool:
        """Count arriving bytes; True when this arrival is a sampling instant."""
        if self.next_sample is None:
            self.next_sample = self._draw()
        self.arrived += size
        if self.arrived < self.next_sample:
            return False
        self.arrived = 0
        self.next_sample = None
        self.samples += 1
        return True

    def quantize(self, fb: float) -> int:
        return min(math.ceil(fb / self.quant_unit), self.fb_max)


def feedback(occupancy: int, q_eq: int, q_old: int, w: float) -> float:
    return (occupancy - q_eq) + w * (occupancy - q_old)


def cp_sample(occupancy: int, cp: CpState, flow_id: int = -1, switch: int = -1) -> Cnm | None:
    fb = feedback(occupancy, cp.q_eq, cp.q_old, cp.w)
    cp.q_old = occupancy
    cp.severity = cp.quantize(fb) if fb > 0 else 0
    if fb <= 0:
        return None
    return Cnm(flow_id, cp.severity, fb, switch)


class RpState:
    """Per-flow rate limiter state at the source."""

    def __init__(self, capacity_bps: float, gd: float = 1 / 128, r_ai_bps: float = 5e6,
                 min_rate_bps: float = 1e6, byte_counter: int = 150 * KB,
                 fast_recovery_stages: int = 5):
        self.capacity = capacity_bps
        self.rc = capacity_bps
        self.rt = capacity_bps
        self.gd = gd
        self.r_ai = r_ai_bps
        self.min_rate = min_rate_bps
        self.byte_counter_limit = byte_counter
        self.fast_recovery_stages = fast_recovery_stages
        self.byte_counter = 0
        self.bc_stage = 0
        self.timer_stage = 0
        self.decreases = 0
        self.increases = 0

    @classmethod
    def from_config(cls, cfg: QcnConfig, capacity_bps: float) -> "RpState":
        return cls(capacity_bps, cfg.gd, cfg.r_ai_mbps * 1e6, cfg.min_rate_mbps * 1e6,
                   cfg.byte_counter, cfg.fast_recovery_stages)

    @property
    def in_fast_recovery(self) -> bool:
        return max(self.bc_stage, self.timer_stage) <= self.fast_recovery_stages

    def on_bytes_sent(self, size: int) -> bool:
        """Advance the byte counter; True when a byte-counter stage expired."""
        self.byte_counter += size
        if self.byte_counter < self.byte_counter_limit:
            return False
        self.byte_counter -= self.byte_counter_limit
        rp_increase(self, "bytes")
        return True


def rp_on_cnm(rp: RpState, cnm: Cnm) -> RpState:
    if cnm.fb <= 0:
        raise ValueError("CNM feedback must be positive")
    rp.rt = rp.rc
    rp.rc = max(rp.min_rate, rp.rc * (1 - rp.gd * cnm.fb))
    rp.byte_counter = 0
    rp.bc_stage = 0
    rp.timer_stage = 0
    rp.decreases += 1
    return rp


def rp_increase(rp: RpState, cause: str = "bytes") -> RpState:
    if cause == "bytes":
        rp.bc_stage += 1
    elif cause == "timer":
        rp.timer_stage += 1
    else:
        raise ValueError(f"unknown increase cause {cause!r}")
    if not rp.in_fast_recovery:
        rp.rt = min(rp.rt + rp.r_ai, rp.capacity)
    rp.rc = min((rp.rc + rp.rt) / 2, rp.capacity)
    rp.increases += 1
    return rp


class TokenBucket:
    """Byte token bucket refilled at ``rate_bps`` with a one-frame burst."""

    def __init__(self, rate_bps: float, burst: int = MTU, now: int = 0):
        self.rate = rate_bps
        self.burst = burst
        self.tokens = float(burst)
        self.last = now

    def _refill(self, now: int) -> None:
        if now > self.last:
            self.tokens = min(self.burst, self.tokens + (now - self.last) * self.rate / (8 * PS_PER_S))
            self.last = now

    def set_rate(self, rate_bps: float, now: int) -> None:
        self._refill(now)
        self.rate = rate_bps

    def ready_at(self, size: int, now: int) -> int:
        """Earliest time (ps) at which ``size`` bytes may be sent."""
        self._refill(now)
        short = size - self.tokens
        if short <= 1e-6:
            return now
        return now + math.ceil(short * 8 * PS_PER_S / self.rate)

    def consume(self, size: int, now: int) -> None:
        self._refill(now)
        self.tokens -= size


def rp_enforce(rp: RpState, frame_sizes, start: int = 0) -> list[int]:
    """Transmit start times for a backlog of frames paced at ``rp.rc`` over a
    link of ``rp.capacity``; a frame never starts before the previous one has
    finished serializing."""
    bucket = TokenBucket(rp.rc, MTU, start)
    times = []
    link_free = start
    for size in frame_sizes:
        t = bucket.ready_at(size, link_free)
        bucket.consume(size, t)
        times.append(t)
        link_free = t + math.ceil(size * 8 * PS_PER_S / rp.capacity)
    return times
