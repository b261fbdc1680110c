import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from erasure_feedback.channel import ERASED_SYMBOL, Packet
from erasure_feedback.codec import (
    CandidateSet,
    Codebook,
    DecodeState,
    bits_to_positions,
    decode_status,
    detect_new_block,
    distinguishing_positions,
    eliminate,
    encode_symbol,
    position_bits,
    resolve_list,
)
from erasure_feedback.params import ConfigError


def test_symbols_are_pure_functions():
    a = Codebook(123, 4, 8, 5)
    b = Codebook(123, 4, 8, 5)
    for j, t in [(0, 1), (255, 9), (17, 1000)]:
        assert a.symbol(j, t) == b.symbol(j, t)
    assert encode_symbol(a, 3, 2) == Packet(a.symbol(3, 2), 5)


@given(st.integers(0, 2**64 - 1), st.integers(0, 10**6), st.integers(1, 63), st.integers(1, 10**9))
def test_scalar_and_vector_symbols_agree(key, block, width, t):
    cb = Codebook(key, block, 10, width)
    js = np.array([0, 1, 511, 1023], dtype=np.int64)
    assert cb.symbols(js, t).tolist() == [cb.symbol(int(j), t) for j in js]
    assert all(0 <= s < 2**width for s in cb.symbols(js, t))


def test_collision_frequency_matches_uniform_symbols():
    cb = Codebook(99, 0, 20, 8)
    js = np.arange(0, 2**20, 2, dtype=np.int64)
    hits = trials = 0
    for t in range(1, 5):
        a, b = cb.symbols(js, t), cb.symbols(js + 1, t)
        hits += int(np.sum(a == b))
        trials += js.size
    p = hits / trials
    assert abs(p - 2**-8) < 4 * np.sqrt(2**-8 / trials)


def test_symbols_uniform_over_alphabet():
    cb = Codebook(5, 2, 16, 4)
    counts = np.bincount(cb.symbols(np.arange(2**16), 3), minlength=16)
    assert counts.min() > 3800 and counts.max() < 4400


def test_blocks_and_times_independent():
    a = Codebook(5, 0, 16, 1).symbols(np.arange(2**16), 1)
    b = Codebook(5, 1, 16, 1).symbols(np.arange(2**16), 1)
    c = Codebook(5, 0, 16, 1).symbols(np.arange(2**16), 2)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.02
    assert abs(np.corrcoef(a, c)[0, 1]) < 0.02


def test_codebook_limits():
    with pytest.raises(ConfigError):
        Codebook(0, 0, 21, 4)
    with pytest.raises(ConfigError):
        Codebook(0, 0, 4, 0)
    with pytest.raises(ConfigError):
        encode_symbol(Codebook(0, 0, 4, 4), 16, 1)


def test_survivor_count_after_one_symbol_exhaustive():
    # averaged over every transmitted message: 1 + (M-1)/2^C
    sizes = []
    for key in range(40):
        cb = Codebook(key, 0, 4, 4)
        for j in range(16):
            out = eliminate(CandidateSet.full(16), cb, 1, cb.symbol(j, 1))
            assert j in out
            sizes.append(len(out))
    assert np.mean(sizes) == pytest.approx(1 + 15 / 16, abs=0.12)


def test_erasure_does_not_eliminate():
    cs = CandidateSet.full(8)
    cb = Codebook(0, 0, 3, 2)
    assert eliminate(cs, cb, 1, ERASED_SYMBOL) is cs
    assert eliminate(cs, cb, 1, Packet.erasure(2)) is cs


def test_decode_status_cases():
    assert decode_status(CandidateSet(np.array([3])), 1) == (DecodeState.UNIQUE, (3,))
    assert decode_status(CandidateSet(np.array([1, 4])), 2) == (DecodeState.LIST_READY, (1, 4))
    assert decode_status(CandidateSet(np.array([1, 4, 5])), 2)[0] is DecodeState.UNDECIDED
    with pytest.raises(AssertionError):
        decode_status(CandidateSet(np.array([], dtype=np.int64)), 1)


def test_detection_probability_binary_packets():
    rng = np.random.default_rng(11)
    beta, trials = 0.25, 200_000
    cb_old, cb_new = Codebook(1, 0, 4, 2), Codebook(1, 1, 4, 2)
    t = np.arange(1, trials + 1)
    hits = 0
    for k in range(trials):
        y = ERASED_SYMBOL if rng.random() < beta else cb_new.symbol(int(rng.integers(16)), int(t[k]))
        hits += detect_new_block(5, cb_old, int(t[k]), y)
    assert hits / trials == pytest.approx(0.75 * 0.75, abs=4e-3)


def test_detection_delay_is_geometric():
    # first detecting use after a block switch: P(T > t) = (1 - 0.5625)^t
    rng = np.random.default_rng(12)
    old, new = Codebook(2, 0, 4, 2), Codebook(2, 1, 4, 2)
    delays = []
    for rep in range(20_000):
        j_old, j_new, t0 = int(rng.integers(16)), int(rng.integers(16)), rep * 100
        for dt in range(1, 100):
            y = ERASED_SYMBOL if rng.random() < 0.25 else new.symbol(j_new, t0 + dt)
            if detect_new_block(j_old, old, t0 + dt, y):
                delays.append(dt)
                break
    delays = np.array(delays)
    for t in (1, 2, 4):
        assert np.mean(delays > t) == pytest.approx(0.4375**t, abs=0.012)


def test_distinguishing_positions_and_round_trip():
    assert distinguishing_positions((0b0100, 0b1100), 1) == [3]
    assert distinguishing_positions((1, 2, 3), 3) == [0, 1, 0]
    assert distinguishing_positions((5, 7), 3) == [1, 0, 0]
    with pytest.raises(ConfigError):
        distinguishing_positions((1, 2, 3), 2)


@given(st.lists(st.integers(0, 2**10 - 1), min_size=2, max_size=4, unique=True), st.data())
def test_list_resolution_recovers_every_member(members, data):
    members = tuple(sorted(members))
    count = len(members) * (len(members) - 1) // 2
    positions = distinguishing_positions(members, count)
    width = 4
    assert bits_to_positions(position_bits(positions, width), width, count) == positions
    truth = data.draw(st.sampled_from(members))
    values = [(truth >> p) & 1 for p in positions]
    assert resolve_list(members, positions, values) == truth


def test_two_member_list_all_pairs_exhaustive():
    for a, b in itertools.combinations(range(16), 2):
        (p,) = distinguishing_positions((a, b), 1)
        for truth in (a, b):
            assert resolve_list((a, b), [p], [(truth >> p) & 1]) == truth


def test_zero_width_positions():
    assert bits_to_positions([], 0, 3) == [0, 0, 0]
    assert position_bits([0, 0], 0) == []
