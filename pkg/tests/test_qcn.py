import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcbsim.engine import PS_PER_MS
from dcbsim.fabric import Host
from dcbsim.frame import CNM, MTU
from dcbsim.qcn import (Cnm, CpState, QcnConfig, RpState, TokenBucket, cp_sample, feedback,
                        rp_enforce, rp_increase, rp_on_cnm)

from conftest import run_text

KB = 1024
G = 1e9


def test_equilibrium_gives_no_feedback():
    cp = CpState(30 * KB)
    cp.q_old = 30 * KB
    assert cp_sample(30 * KB, cp) is None


def test_feedback_arithmetic():
    assert feedback(40 * KB, 30 * KB, 35 * KB, 2) == 20 * KB
    cp = CpState(30 * KB, w=2)
    cp.q_old = 35 * KB
    cnm = cp_sample(40 * KB, cp, flow_id=7, switch=3)
    assert cnm.fb_raw == 20 * KB and cnm.flow_id == 7 and cnm.switch == 3
    assert cnm.fb == math.ceil(20 * KB / (30 * KB * 5 / 63))
    assert cp.q_old == 40 * KB


@given(st.integers(0, 200 * KB), st.integers(0, 200 * KB), st.integers(1, 100 * KB),
       st.floats(0.1, 8))
def test_cnm_iff_positive_feedback(q, q_old, q_eq, w):
    cp = CpState(q_eq, w=w)
    cp.q_old = q_old
    fb = feedback(q, q_eq, q_old, w)
    cnm = cp_sample(q, cp)
    assert (cnm is not None) == (fb > 0)
    if cnm is not None:
        assert 1 <= cnm.fb <= cp.fb_max


def test_quantization_saturates():
    cp = CpState(20 * KB)
    assert cp.quantize(cp.quant_unit * 63) == 63
    assert cp.quantize(10**9) == 63
    assert cp.quantize(1) == 1


def test_sampling_is_byte_driven():
    cp = CpState(20 * KB, sample_interval=150 * KB, rng=random.Random(5))
    arrived = 0
    for _ in range(200_000):
        cp.on_arrival(MTU)
        arrived += MTU
    expected = arrived / (150 * KB)
    assert abs(cp.samples - expected) <= 0.03 * expected


def test_variable_sampling_tightens_with_severity():
    cp = CpState(20 * KB, variable=True)
    assert cp.interval == 150 * KB
    cp.severity = 63
    assert cp.interval == pytest.approx(15 * KB)


def test_decrease_at_full_feedback():
    rp = RpState(10 * G)
    rp_on_cnm(rp, Cnm(0, 63))
    assert rp.rc == pytest.approx(10 * G * (1 - 63 / 128))
    assert rp.rc / G == pytest.approx(5.08, abs=0.005)
    assert rp.rt == 10 * G


def test_cnm_without_feedback_is_rejected():
    with pytest.raises(ValueError):
        rp_on_cnm(RpState(10 * G), Cnm(0, 0))


def test_fast_recovery_averages_toward_target():
    rp = RpState(10 * G)
    rp.rc, rp.rt = 5 * G, 10 * G
    rp_increase(rp)
    assert rp.rc == 7.5 * G
    for _ in range(4):
        rp_increase(rp)
    assert rp.rc / G == pytest.approx(9.84375)


def test_recovery_within_ten_byte_counter_periods():
    # oracle: after k fast-recovery stages rc = C - (C - rc0) / 2**k
    C = 10 * G
    rp = RpState(C)
    rp_on_cnm(rp, Cnm(0, 63))
    rc0 = rp.rc
    closed = [C - (C - rc0) / 2**k for k in range(1, 6)]
    k_needed = next(k for k, v in enumerate(closed, 1) if v >= 0.95 * C)
    got = []
    for _ in range(10):
        rp.on_bytes_sent(150 * KB)
        got.append(rp.rc)
    assert got[:5] == pytest.approx(closed)
    assert got[k_needed - 1] >= 0.95 * C
    assert k_needed <= 10


def test_byte_counter_fires_every_150kb():
    rp = RpState(10 * G)
    rp_on_cnm(rp, Cnm(0, 10))
    fired = sum(rp.on_bytes_sent(MTU) for _ in range(1000))
    assert fired == (1000 * MTU) // (150 * KB)


def test_rate_floor():
    rp = RpState(10 * G, min_rate_bps=1e6)
    for _ in range(2000):
        rp_on_cnm(rp, Cnm(0, 63))
    assert rp.rc == 1e6


@settings(max_examples=100)
@given(st.lists(st.one_of(st.integers(1, 63), st.sampled_from(["bytes", "timer"])), max_size=200))
def test_rate_stays_in_bounds(ops):
    rp = RpState(10 * G)
    for op in ops:
        if isinstance(op, int):
            rp_on_cnm(rp, Cnm(0, op))
            assert rp.rc <= rp.rt
        else:
            rp_increase(rp, op)
        assert rp.min_rate <= rp.rc <= rp.capacity


def test_pacing_at_line_rate_adds_nothing():
    rp = RpState(10 * G)
    times = rp_enforce(rp, [MTU] * 10)
    assert times == [i * 1_200_000 for i in range(10)]


def test_half_rate_doubles_the_gap():
    rp = RpState(10 * G)
    rp.rc = 5 * G
    times = rp_enforce(rp, [MTU] * 20)
    gaps = {b - a for a, b in zip(times[1:], times[2:])}
    assert gaps == {2_400_000}


@pytest.mark.parametrize("rate", [1 * G, 3.3 * G, 7 * G])
def test_paced_rate_over_ten_ms(rate):
    rp = RpState(10 * G)
    rp.rc = rate
    n = int(rate * 0.01 / 8 / MTU) + 50
    times = rp_enforce(rp, [MTU] * n)
    sent = sum(1 for t in times if t < 10 * PS_PER_MS) * MTU
    assert abs(sent * 8 / 0.01 - rate) <= 0.01 * rate


def test_token_bucket_burst_is_one_frame():
    b = TokenBucket(1 * G, MTU, 0)
    assert b.ready_at(MTU, 0) == 0
    b.consume(MTU, 0)
    assert b.ready_at(MTU, 0) == 12_000_000


def test_config_targets():
    assert QcnConfig().target(100 * KB) == 20 * KB
    assert QcnConfig(q_eq=5000).target(100 * KB) == 5000
    with pytest.raises(ValueError):
        QcnConfig(gd=1 / 32).validate()


def test_mice_finish_injecting_before_any_cnm_reaches_them(monkeypatch):
    late = []
    orig = Host.receive

    def watch(self, frame, port):
        if frame.kind == CNM:
            sf = self.senders.get(frame.flow_id)
            if sf is not None and sf.flow.cls == 0:
                late.append(sf.next_off >= sf.size)
        orig(self, frame, port)

    monkeypatch.setattr(Host, "receive", watch)
    run_text("[topology]\nprop_delay_us = 4\n[traffic]\nmice_load = 0.2\nmice_size_dist = fixed\n"
             "mice_size_mean = 2KB\n[flow_control]\npfc.enabled = false", horizon_ms=10)
    assert late and all(late)
