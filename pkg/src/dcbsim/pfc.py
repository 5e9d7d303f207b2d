"""Priority-based flow control: Xon/Xoff per (ingress port, priority).

The switch owning an ingress queue calls :func:`on_occupancy_rise` after
every enqueue and :func:`on_occupancy_fall` after every departure. The
returned PAUSE/RESUME frame goes back over the link the data arrived on.
The upstream device applies it with :func:`on_pause_received`.
"""

from __future__ import annotations

from dataclasses import dataclass

from .frame import MTU, PAUSE, RESUME, Frame, FrameKind

KB = 1024

DEFAULT_K1 = 25057            # 24.47 KB
DEFAULT_HEADROOM = 48 * KB - DEFAULT_K1


@dataclass
class PfcConfig:
    enabled: bool = True
    K1: int = DEFAULT_K1
    K2: int = DEFAULT_K1 // 2
    headroom: int = DEFAULT_HEADROOM

    def validate(self, capacity: int | None = None, prop_delay_ps: int = 0,
                 line_rate_bps: float = 10e9, mtu: int = MTU) -> None:
        if not 0 <= self.K2 < self.K1:
            raise ValueError(f"need 0 <= K2 < K1, got K2={self.K2}, K1={self.K1}")
        need = required_headroom(prop_delay_ps, line_rate_bps, mtu)
        if self.headroom < need:
            raise ValueError(
                f"PFC headroom {self.headroom} B below the {need} B needed to absorb "
                f"in-flight data at {line_rate_bps / 1e9:g} Gbps with {prop_delay_ps} ps propagation")
        if capacity is not None and self.K1 + self.headroom > capacity:
            raise ValueError(
                f"K1 + headroom = {self.K1 + self.headroom} B exceeds the {capacity} B queue partition")


def required_headroom(prop_delay_ps: int, line_rate_bps: float, mtu: int = MTU) -> int:
    """Bytes that can still land after a PAUSE is decided: a round trip of
    propagation at line rate plus one frame serializing at each end."""
    in_flight = 2 * prop_delay_ps * line_rate_bps / 8 / 1e12
    return int(-(-in_flight // 1)) + 2 * mtu


@dataclass
class PauseState:
    """Halt state of one (egress port, priority) on the device being paused."""

    halted: bool = False
    pause_events: int = 0
    resume_events: int = 0


def on_occupancy_rise(queue) -> Frame | None:
    if not queue.pfc_enabled or queue.paused_upstream or queue.occupancy <= queue.K1:
        return None
    queue.paused_upstream = True
    queue.pause_sent += 1
    return Frame.control(PAUSE, queue.priority)


def on_occupancy_fall(queue) -> Frame | None:
    if not queue.paused_upstream or queue.occupancy >= queue.K2:
        return None
    queue.paused_upstream = False
    queue.resume_sent += 1
    return Frame.control(RESUME, queue.priority)


def on_pause_received(state: PauseState, kind: FrameKind) -> bool:
    """Apply PAUSE/RESUME; returns True when the halt flag changed.

    A RESUME for a class that is not halted is a no-op. Frames already
    serializing are never recalled; the caller only stops picking new DATA.
    """
    if kind == PAUSE:
        if state.halted:
            return False
        state.halted = True
        state.pause_events += 1
        return True
    if kind == RESUME:
        if not state.halted:
            return False
        state.halted = False
        state.resume_events += 1
        return True
    raise ValueError(f"not a PFC frame kind: {kind!r}")
