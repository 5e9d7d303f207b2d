"""Discrete-event core: time-ordered event heap, simulated clock and run loop.

Simulated time is an integer number of picoseconds. A 64-byte control frame
at 10 Gbps serializes in 51.2 ns, which is not a whole nanosecond, so the
clock runs one step finer than that to keep every timestamp exact.
"""

from __future__ import annotations

import heapq
from typing import Any, Callable

PS_PER_NS = 1_000
PS_PER_US = 1_000_000
PS_PER_MS = 1_000_000_000
PS_PER_S = 1_000_000_000_000


def ns(x: float) -> int:
    return round(x * PS_PER_NS)


def us(x: float) -> int:
    return round(x * PS_PER_US)


def ms(x: float) -> int:
    return round(x * PS_PER_MS)


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled before the current simulated time."""


class Event:
    __slots__ = ("fire_time", "seq", "action", "args")

    def __init__(self, fire_time: int, seq: int, action: Callable[..., Any] | None, args: tuple):
        self.fire_time = fire_time
        self.seq = seq
        self.action = action
        self.args = args

    @property
    def pending(self) -> bool:
        return self.action is not None

    def __repr__(self) -> str:
        name = getattr(self.action, "__qualname__", None)
        return f"Event(t={self.fire_time}, seq={self.seq}, action={name})"


class Simulator:
    """Single-threaded event loop.

    Events fire in (fire_time, seq) order; ``seq`` is the insertion counter,
    so two events at the same instant run in the order they were scheduled.
    """

    def __init__(self) -> None:
        self.now = 0
        self._heap: list[tuple[int, int, Event]] = []
        self._seq = 0
        self.dispatched = 0

    def schedule_at(self, fire_time: int, action: Callable[..., Any], *args: Any) -> Event:
        if fire_time < self.now:
            raise SchedulingError(f"cannot schedule at t={fire_time} ps, clock is at {self.now} ps")
        seq = self._seq
        self._seq = seq + 1
        ev = Event(fire_time, seq, action, args)
        heapq.heappush(self._heap, (fire_time, seq, ev))
        return ev

    def schedule(self, delay: int, action: Callable[..., Any], *args: Any) -> Event:
        return self.schedule_at(self.now + delay, action, *args)

    def cancel(self, event: Event | None) -> bool:
        """Remove an unfired event. Returns False if it already fired or was cancelled."""
        if event is None or event.action is None:
            return False
        event.action = None
        event.args = ()
        return True

    def peek_time(self) -> int | None:
        heap = self._heap
        while heap and heap[0][2].action is None:
            heapq.heappop(heap)
        return heap[0][0] if heap else None

    def run_until(self, t_end: int) -> int:
        """Dispatch every pending event with fire_time <= t_end.

        The clock is left at ``t_end``. Returns the number of events dispatched.
        """
        if t_end < self.now:
            raise SchedulingError(f"horizon {t_end} ps is before the clock ({self.now} ps)")
        heap = self._heap
        pop = heapq.heappop
        count = 0
        while heap:
            t, _, ev = heap[0]
            if t > t_end:
                break
            pop(heap)
            action = ev.action
            if action is None:
                continue
            ev.action = None
            self.now = t
            action(*ev.args)
            count += 1
        self.now = t_end
        self.dispatched += count
        return count

    def __len__(self) -> int:
        return sum(1 for _, _, ev in self._heap if ev.action is not None)
