import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcbsim.engine import PS_PER_S, PS_PER_US, SchedulingError, Simulator, us


def test_zero_delay_event_runs_after_current_one():
    sim = Simulator()
    seen = []

    def first():
        seen.append("first")
        sim.schedule(0, lambda: seen.append("child"))
        seen.append("first-end")

    sim.schedule(0, first)
    sim.run_until(0)
    assert seen == ["first", "first-end", "child"]


def test_equal_times_fire_in_insertion_order():
    sim = Simulator()
    seen = []
    sim.schedule_at(5, seen.append, "A")
    sim.schedule_at(5, seen.append, "B")
    sim.run_until(10)
    assert seen == ["A", "B"]


def test_dispatch_order_matches_stable_sort():
    # 10^6 events against a reference sort on (time, insertion index)
    rng = random.Random(7)
    n = 10**6
    times = [rng.randrange(0, 50_000) for _ in range(n)]
    sim = Simulator()
    out = []
    push = out.append
    for i, t in enumerate(times):
        sim.schedule_at(t, push, i)
    assert sim.run_until(max(times)) == n
    expected = sorted(range(n), key=lambda i: (times[i], i))
    assert out == expected


def test_run_until_empty_queue_advances_clock():
    sim = Simulator()
    assert sim.run_until(PS_PER_S) == 0
    assert sim.now == PS_PER_S


def test_run_until_before_first_event():
    sim = Simulator()
    fired = []
    sim.schedule_at(us(10), fired.append, 1)
    assert sim.run_until(us(5)) == 0
    assert fired == []
    assert sim.run_until(us(10)) == 1
    assert sim.now == us(10)


def test_scheduling_in_the_past_is_rejected():
    sim = Simulator()
    sim.run_until(100)
    with pytest.raises(SchedulingError):
        sim.schedule_at(99, lambda: None)
    with pytest.raises(SchedulingError):
        sim.run_until(50)


def test_cancel_unfired_and_fired():
    sim = Simulator()
    fired = []
    a = sim.schedule_at(10, fired.append, "a")
    b = sim.schedule_at(20, fired.append, "b")
    assert sim.cancel(a) is True
    assert sim.cancel(a) is False
    sim.run_until(30)
    assert fired == ["b"]
    assert sim.cancel(b) is False
    assert sim.cancel(None) is False


def test_cancel_interleaving_set_difference():
    rng = random.Random(3)
    sim = Simulator()
    fired = set()
    handles = {}
    cancelled = set()
    for i in range(1000):
        handles[i] = sim.schedule_at(rng.randrange(0, 10_000), fired.add, i)
        if i and rng.random() < 0.3:
            victim = rng.randrange(0, i)
            if sim.cancel(handles[victim]):
                cancelled.add(victim)
    sim.run_until(10_000)
    assert fired == set(range(1000)) - cancelled


def test_clock_equals_fire_time_during_dispatch():
    sim = Simulator()
    stamps = []
    for t in (3, 1, 2):
        sim.schedule_at(t * PS_PER_US, lambda t=t: stamps.append((t * PS_PER_US, sim.now)))
    sim.run_until(10 * PS_PER_US)
    assert all(a == b for a, b in stamps)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1000), st.integers(0, 50)), min_size=1, max_size=200))
def test_time_never_decreases_and_nothing_is_lost(spec):
    sim = Simulator()
    seen = []

    def fire(depth):
        seen.append(sim.now)
        if depth:
            sim.schedule(depth, fire, 0)

    for t, d in spec:
        sim.schedule_at(t, fire, d)
    count = sim.run_until(2000)
    assert count == len(spec) + sum(1 for _, d in spec if d)
    assert seen == sorted(seen)
