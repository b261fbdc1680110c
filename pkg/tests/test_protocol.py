import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from erasure_feedback.params import ConfigError, SystemConfig
from erasure_feedback.protocol import (
    ArqScheme,
    Event,
    ListScheme,
    NoListScheme,
    ProtocolViolation,
    RoundPlan,
    SchemeKind,
    ServiceTimeSample,
    arq_receive,
    block_available_cycle,
    make_scheme,
    measure_service_components,
)


def _cfg(**kw):
    base = dict(c_f=4, c_b=2, beta_f=0.25, beta_b=0.25, n=4, c=1, ell=2)
    base.update(kw)
    return SystemConfig(**base)


# ---------------------------------------------------------------------------
# no-list scheme


def test_nolist_lossless_keeps_up_with_arrivals():
    cfg = _cfg(beta_f=0.0, beta_b=0.0)
    s = NoListScheme(cfg, 0.25).run(2000)
    assert s.block_bits == 4
    available = 2000 // (cfg.n * cfg.c)
    assert s.committed_blocks >= available - 3


def test_nolist_dead_feedback_stalls_after_first_block():
    s = NoListScheme(_cfg(beta_b=1.0), 0.25).run(2000)
    assert s.committed_blocks == 1
    assert all(ev.kind != "ack" for ev in s.events)


def test_nolist_dead_forward_commits_nothing():
    s = NoListScheme(_cfg(beta_f=1.0), 0.25).run(500)
    assert s.committed_blocks == 0


def test_nolist_events_follow_stage_order():
    s = NoListScheme(_cfg(), 0.25, seed=3).run(3000)
    order = {"start": 0, "detect": 1, "decode": 2, "ack": 3}
    by_block = {}
    for ev in s.events:
        by_block.setdefault(ev.block, []).append(order[ev.kind])
    for block, kinds in by_block.items():
        assert kinds == sorted(kinds), block
        assert kinds[: len(set(kinds))] == sorted(set(kinds))


def test_nolist_feedback_stage_is_geometric():
    cfg = _cfg(c_f=2, beta_f=0.25, beta_b=0.5, n=1)
    s = NoListScheme(cfg, 0.5, seed=1).run(40_000)
    t3 = np.array([x.t3 for x in measure_service_components(s.events, "nolist", cfg.k_f)])
    assert t3.size > 1000
    assert t3.min() == 1
    assert t3.mean() == pytest.approx(2.0, rel=0.05)
    assert np.mean(t3 > 2) == pytest.approx(0.25, abs=0.03)


def test_nolist_large_block_rejected_when_empty():
    with pytest.raises(ConfigError):
        NoListScheme(_cfg(n=1), 0.1)


def test_block_available_cycle():
    assert block_available_cycle(3, _cfg(n=4, c=2)) == 24


# ---------------------------------------------------------------------------
# list scheme


def test_round_plan_counts():
    plan = RoundPlan(2, 4)
    assert (plan.pairs, plan.position_width, plan.m) == (1, 2, 4)
    assert plan.kinds() == ["list", "position", "position", "value"]
    assert RoundPlan(2, 1).m == 2
    assert RoundPlan(3, 8).m == 1 + 3 * 4
    assert RoundPlan(1, 8).m == 1


def test_list_lossless_exchange_count():
    cfg = _cfg(beta_f=0.0, beta_b=0.0, n=8)
    s = ListScheme(cfg, 0.0625).run(800)  # B = 2 bits
    assert s.committed_blocks >= 800 // 8 - 2
    done = [ev for ev in s.events if ev.kind == "done"]
    # every served block costs max(P*L, 1) + P exchanges, one per encoder counter step
    per_block = max(s.plan.position_rounds, 1) + s.plan.value_rounds
    assert s.enc.counter == pytest.approx(len(done) * per_block, abs=per_block)


def test_list_two_messages_single_value_round():
    # B = 1: the list {0, 1} is ready at the first unerased symbol and one value bit resolves it
    cfg = _cfg(c_f=2, c_b=2, n=2, ell=2)
    s = ListScheme(cfg, 0.25, seed=5).run(3000)
    assert s.block_bits == 1 and s.plan.m == 2
    assert s.committed_blocks > 100


def test_list_two_member_lists_resolve_for_every_truth():
    cfg = _cfg(c_f=2, c_b=2, n=4, ell=2, beta_f=0.1, beta_b=0.1)
    for seed in range(25):
        s = ListScheme(cfg, 0.5, seed=seed).run(400)
        assert s.committed_blocks > 10


def test_list_rejects_one_bit_packets():
    with pytest.raises(ConfigError):
        ListScheme(_cfg(c_f=1), 0.5)
    with pytest.raises(ConfigError):
        ListScheme(_cfg(c_b=1), 0.25)


def test_list_dead_feedback_commits_at_most_one_block():
    s = ListScheme(_cfg(beta_b=1.0, n=8), 0.0625).run(1000)
    assert s.committed_blocks <= 1


# ---------------------------------------------------------------------------
# ARQ baseline


def test_arq_lossless_delivers_every_packet():
    cfg = _cfg(beta_f=0.0, beta_b=0.0)
    s = ArqScheme(cfg, 0.25).run(400)
    assert s.state.accepted >= 400 * 4 * 0.25 / 3 - 3  # 3 payload bits per packet


def test_arq_advance_probability():
    cfg = _cfg(n=1, beta_f=0.25, beta_b=0.25)
    s = ArqScheme(cfg, 0.75, seed=2).run(100_000)  # saturated: 3 bits per cycle
    done = sum(ev.kind == "done" for ev in s.events)
    assert done / 100_000 == pytest.approx(0.5625, abs=0.006)


def test_arq_duplicate_dropped():
    s = ArqScheme(_cfg(beta_f=0.0, beta_b=1.0), 0.25).run(50)
    assert s.state.accepted == 1
    assert not arq_receive(s, s.state.seq, s.state.payload, 999)
    assert s.state.accepted == 1


def test_arq_rejects_one_bit_packets():
    with pytest.raises(ConfigError):
        ArqScheme(_cfg(c_f=1), 0.5)


# ---------------------------------------------------------------------------
# invariants over random configurations


configs = st.builds(
    dict,
    kind=st.sampled_from(list(SchemeKind)),
    k_f=st.integers(1, 3),
    k_b=st.integers(1, 2),
    c_f=st.integers(2, 5),
    c_b=st.integers(2, 3),
    beta_f=st.sampled_from([0.0, 0.1, 0.5, 0.9]),
    beta_b=st.sampled_from([0.0, 0.2, 0.6, 1.0]),
    n=st.integers(1, 6),
    ell=st.integers(1, 3),
    lag=st.integers(0, 1),
    seed=st.integers(0, 2**32),
)


@settings(max_examples=60, deadline=None)
@given(configs)
def test_no_violation_and_bounded_pointer_gaps(p):
    cfg = SystemConfig(k_f=p["k_f"], k_b=p["k_b"], c_f=p["c_f"], c_b=p["c_b"], beta_f=p["beta_f"],
                       beta_b=p["beta_b"], n=p["n"], ell=p["ell"], feedback_lag=p["lag"])
    rate = min(0.9, 8 / (p["n"] * p["k_f"] * p["c_f"]))
    if cfg.block_bits(rate) < 1:
        rate = 1 / (p["n"] * p["k_f"] * p["c_f"]) + 1e-9
    s = make_scheme(p["kind"], cfg, rate, seed=p["seed"])
    s.run(150)  # every commit is checked against the truth inside run
    assert s.commit_use == sorted(s.commit_use)
    if p["kind"] is SchemeKind.NOLIST:
        assert s.enc.block - s.dec.last_decoded in (0, 1)
    elif p["kind"] is SchemeKind.LIST:
        assert s.enc.counter - s.dec.counter in (0, 1)


def test_wrong_commit_raises():
    s = NoListScheme(_cfg(), 0.25)
    with pytest.raises(ProtocolViolation):
        s._commit(1, s._truth[1] ^ 1, s._truth[1], 1)


def test_runs_reproducible():
    a = make_scheme("nolist", _cfg(), 0.25, seed=9).run(500)
    b = make_scheme("nolist", _cfg(), 0.25, seed=9).run(500)
    assert a.events == b.events


# ---------------------------------------------------------------------------
# service-time bookkeeping


def test_measure_service_components_hand_log():
    events = [
        Event(0, "F", "start", 1, 1),
        Event(2, "F", "detect", 1, 3),
        Event(4, "F", "decode", 1, 5),
        Event(5, "B", "ack", 1, 6),
        Event(6, "F", "start", 2, 7),
    ]
    (sample,) = measure_service_components(events, "nolist", 1)
    assert sample == ServiceTimeSample(1, 3, 2, 2)
    assert sample.total == 7


def test_measure_arq_components():
    events = [Event(0, "F", "start", 1, 1), Event(3, "F", "accept", 1, 4), Event(3, "B", "done", 1, 4)]
    (sample,) = measure_service_components(events, SchemeKind.ARQ, 1)
    assert (sample.t1, sample.t2, sample.t3) == (0, 4, 1)
