"""Window-based end-to-end transports for the elephant class.

``TcpState`` is a minimal Reno sender (byte-counted slow start, additive
increase, fast retransmit on three duplicate ACKs, go-back-N on timeout).
``DctcpState`` layers the DCTCP marking-fraction estimator on top of it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .frame import MTU

PS_PER_US = 1_000_000


@dataclass
class TransportConfig:
    kind: str = "none"                # none | tcp | dctcp
    init_cwnd: int = 10               # segments
    min_rto_us: float = 200.0
    max_rto_us: float = 100_000.0
    dupack_threshold: int = 3
    dctcp_g: float = 1 / 16
    ecn_threshold: int = 30 * 1024

    def validate(self) -> None:
        if self.kind not in ("none", "tcp", "dctcp"):
            raise ValueError(f"transport kind must be none, tcp or dctcp, got {self.kind!r}")
        if self.init_cwnd < 1:
            raise ValueError("init_cwnd must be >= 1 segment")
        if self.min_rto_us <= 0 or self.max_rto_us < self.min_rto_us:
            raise ValueError("need 0 < min_rto_us <= max_rto_us")
        if not 0 < self.dctcp_g <= 1:
            raise ValueError("dctcp_g must be in (0, 1]")
        if self.ecn_threshold <= 0:
            raise ValueError("ecn_threshold must be positive")


class Mode(enum.Enum):
    SLOW_START = "slow_start"
    AVOIDANCE = "avoidance"
    RECOVERY = "recovery"


class TcpState:
    def __init__(self, mss: int = MTU, init_cwnd: int = 10 * MTU, ssthresh: float = float("inf"),
                 min_rto: int = 200 * PS_PER_US, max_rto: int = 100_000 * PS_PER_US,
                 dupack_threshold: int = 3):
        self.mss = mss
        self.cwnd = float(max(init_cwnd, mss))
        self.ssthresh = ssthresh
        self.snd_una = 0
        self.snd_nxt = 0
        self.recover = 0
        self.dupacks = 0
        self.dupack_threshold = dupack_threshold
        self.mode = Mode.SLOW_START if self.cwnd < ssthresh else Mode.AVOIDANCE
        self.min_rto = min_rto
        self.max_rto = max_rto
        self.srtt: float | None = None
        self.rttvar = 0.0
        self.rto = min_rto
        self.backoff = 1
        self.timeouts = 0
        self.fast_retransmits = 0

    @classmethod
    def from_config(cls, cfg: TransportConfig, mss: int = MTU) -> "TcpState":
        return cls(mss, cfg.init_cwnd * mss, min_rto=round(cfg.min_rto_us * PS_PER_US),
                   max_rto=round(cfg.max_rto_us * PS_PER_US), dupack_threshold=cfg.dupack_threshold)

    @property
    def outstanding(self) -> int:
        return self.snd_nxt - self.snd_una

    def window_allows(self, seg: int) -> bool:
        return self.outstanding == 0 or self.outstanding + seg <= self.cwnd

    def on_send(self, seq: int, size: int) -> None:
        end = seq + size
        if end > self.snd_nxt:
            self.snd_nxt = end

    def rtt_sample(self, rtt: int) -> None:
        if self.srtt is None:
            self.srtt = float(rtt)
            self.rttvar = rtt / 2
        else:
            self.rttvar = 0.75 * self.rttvar + 0.25 * abs(self.srtt - rtt)
            self.srtt = 0.875 * self.srtt + 0.125 * rtt
        self.rto = min(self.max_rto, max(self.min_rto, round(self.srtt + 4 * self.rttvar)))

    @property
    def current_rto(self) -> int:
        return min(self.max_rto, self.rto * self.backoff)

    def _grow(self, acked: int) -> None:
        if self.cwnd < self.ssthresh:
            self.cwnd += acked
            self.mode = Mode.SLOW_START
        else:
            self.cwnd += self.mss * acked / self.cwnd
            self.mode = Mode.AVOIDANCE

    def on_ack(self, ack: int, ece: bool = False) -> bool:
        """Process a cumulative ACK. Returns True when the segment at
        ``snd_una`` must be retransmitted now."""
        if ack > self.snd_una:
            acked = ack - self.snd_una
            self.snd_una = ack
            if self.snd_nxt < ack:
                self.snd_nxt = ack
            self.dupacks = 0
            self.backoff = 1
            if self.mode is Mode.RECOVERY:
                if ack >= self.recover:
                    self.cwnd = max(float(self.mss), self.ssthresh)
                    self.mode = Mode.AVOIDANCE
                    return False
                return True                       # partial ack: next hole
            self._on_new_ack(acked, ece)
            return False
        if ack == self.snd_una and self.snd_nxt > self.snd_una:
            self.dupacks += 1
            if self.dupacks == self.dupack_threshold and self.mode is not Mode.RECOVERY:
                self.ssthresh = max(self.cwnd / 2, 2.0 * self.mss)
                self.cwnd = self.ssthresh
                self.recover = self.snd_nxt
                self.mode = Mode.RECOVERY
                self.fast_retransmits += 1
                return True
        return False

    def _on_new_ack(self, acked: int, ece: bool) -> None:
        self._grow(acked)

    def on_timeout(self) -> None:
        self.ssthresh = max(self.cwnd / 2, 2.0 * self.mss)
        self.cwnd = float(self.mss)
        self.snd_nxt = self.snd_una
        self.dupacks = 0
        self.mode = Mode.SLOW_START
        self.backoff = min(self.backoff * 2, 64)
        self.timeouts += 1


class DctcpState(TcpState):
    def __init__(self, *args, g: float = 1 / 16, **kwargs):
        super().__init__(*args, **kwargs)
        self.alpha = 0.0
        self.g = g
        self.window_end = 0
        self.acked_in_window = 0
        self.marked_in_window = 0
        self.cuts = 0

    @classmethod
    def from_config(cls, cfg: TransportConfig, mss: int = MTU) -> "DctcpState":
        return cls(mss, cfg.init_cwnd * mss, min_rto=round(cfg.min_rto_us * PS_PER_US),
                   max_rto=round(cfg.max_rto_us * PS_PER_US),
                   dupack_threshold=cfg.dupack_threshold, g=cfg.dctcp_g)

    def update_alpha(self, marked_fraction: float) -> float:
        self.alpha = (1 - self.g) * self.alpha + self.g * marked_fraction
        return self.alpha

    def end_window(self, marked_fraction: float) -> None:
        """Close one observation window with the given ECN-echo fraction."""
        self.update_alpha(marked_fraction)
        if marked_fraction > 0:
            self.cwnd = max(float(self.mss), self.cwnd * (1 - self.alpha / 2))
            self.ssthresh = self.cwnd
            self.mode = Mode.AVOIDANCE
            self.cuts += 1

    def _on_new_ack(self, acked: int, ece: bool) -> None:
        self.acked_in_window += acked
        if ece:
            self.marked_in_window += acked
        else:
            self._grow(acked)
        if self.snd_una >= self.window_end:
            frac = self.marked_in_window / self.acked_in_window if self.acked_in_window else 0.0
            self.end_window(frac)
            self.acked_in_window = 0
            self.marked_in_window = 0
            self.window_end = self.snd_nxt


class Reassembly:
    """Receiver-side byte tracking; duplicates are counted once."""

    __slots__ = ("rcv_nxt", "ooo", "ooo_bytes", "duplicate_bytes")

    def __init__(self) -> None:
        self.rcv_nxt = 0
        self.ooo: dict[int, int] = {}
        self.ooo_bytes = 0
        self.duplicate_bytes = 0

    @property
    def unique_bytes(self) -> int:
        return self.rcv_nxt + self.ooo_bytes

    def on_segment(self, seq: int, size: int) -> int:
        """Returns the cumulative ack point after taking in the segment."""
        if seq == self.rcv_nxt:
            self.rcv_nxt += size
            ooo = self.ooo
            while self.rcv_nxt in ooo:
                n = ooo.pop(self.rcv_nxt)
                self.ooo_bytes -= n
                self.rcv_nxt += n
        elif seq > self.rcv_nxt and seq not in self.ooo:
            self.ooo[seq] = size
            self.ooo_bytes += size
        else:
            self.duplicate_bytes += size
        return self.rcv_nxt


def ecn_mark_on_enqueue(occupancy: int, frame, threshold: int):
    """Set the congestion-experienced bit when the queue holds at least
    ``threshold`` bytes as the frame joins it."""
    if occupancy >= threshold:
        frame.ecn = True
    return frame
