"""End-to-end streaming schemes as cycle-stepped state machines.

Three schemes share one harness (:class:`Scheme`): the no-list rateless
scheme with 1-bit mod-2 acknowledgments, the list-decoding scheme whose
rounds are synchronized by mod-2 counters, and the pure repeat-until-success
ARQ baseline.  Each ``step`` runs one cycle: ``k_f`` forward uses, then
``k_b`` feedback uses.

Timekeeping: forward uses are numbered globally from 1, cycle ``t`` owning
uses ``t*k_f + 1 .. (t+1)*k_f``.  Message blocks are numbered from 1; block
``b`` has fully arrived by the start of cycle ``b*n*c``.  Bit ``i`` (global,
1-based) arrives at forward use ``ceil(i * n*c*k_f / B)``.

Every committed value is compared against the ground truth and any mismatch
raises :class:`ProtocolViolation`, so a completed run certifies zero
undetected errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

from .channel import ERASED_SYMBOL, ErasureChannel, SeededRandomSource
from .codec import (
    Codebook,
    bits_to_positions,
    distinguishing_positions,
    position_bits,
    resolve_list,
)
from .params import ConfigError, SystemConfig


class ProtocolViolation(RuntimeError):
    """An invariant that must never fail did (wrong commit, desync, pointer gap)."""

    def __init__(self, message: str, trial: int | None = None, cycle: int | None = None):
        super().__init__(f"{message} (trial={trial}, cycle={cycle})")
        self.trial = trial
        self.cycle = cycle


class SchemeKind(str, Enum):
    NOLIST = "nolist"
    LIST = "list"
    ARQ = "arq"


class Event(NamedTuple):
    """One protocol event.  ``use`` is the forward use it is attributed to;
    feedback-phase events carry the last forward use of their cycle."""

    cycle: int
    phase: str
    kind: str
    block: int
    use: int


@dataclass(frozen=True)
class ServiceTimeSample:
    """One block's service time split into three stages, in forward uses.

    No-list: detection / unique decoding / acknowledgment.
    List: round 1 (list decoding) / remaining rounds up to commit / final ack.
    ARQ: 0 / first acceptance / acknowledgment.
    """

    block: int
    t1: int
    t2: int
    t3: int

    @property
    def total(self) -> int:
        return self.t1 + self.t2 + self.t3


@dataclass(frozen=True)
class RoundPlan:
    """Static round schedule of the list scheme for one block."""

    ell: int
    block_bits: int

    @property
    def pairs(self) -> int:
        return self.ell * (self.ell - 1) // 2

    @property
    def position_width(self) -> int:
        return math.ceil(math.log2(self.block_bits)) if self.block_bits > 1 else 0

    @property
    def position_rounds(self) -> int:
        return self.pairs * self.position_width

    @property
    def value_rounds(self) -> int:
        return self.pairs

    @property
    def m(self) -> int:
        return 1 + self.pairs * (1 + self.position_width)

    def kinds(self) -> list[str]:
        return ["list"] + ["position"] * self.position_rounds + ["value"] * self.value_rounds


class _Blocks:
    """Lazily drawn ground-truth block values (block 1, 2, ...)."""

    def __init__(self, rng: np.random.Generator, bits: int, chunk: int = 1024):
        self._rng = rng
        self._count = 1 << bits
        self._chunk = chunk
        self._values: list[int] = []

    def __getitem__(self, block: int) -> int:
        while block > len(self._values):
            self._values.extend(self._rng.integers(0, self._count, self._chunk).tolist())
        return self._values[block - 1]


def block_available_cycle(block: int, config: SystemConfig) -> int:
    """First cycle at which every bit of ``block`` has arrived."""
    return block * config.n * config.c


# ---------------------------------------------------------------------------
# shared harness


class Scheme:
    """Common state: channels, truth, event log and per-block commit times."""

    kind: SchemeKind
    unit_bits: int

    def __init__(self, config: SystemConfig, rate: float, trial: int = 0,
                 seed: int | None = None, record_events: bool = True):
        self.config = config
        self.rate = rate
        self.trial = trial
        self.block_bits = config.block_bits(rate)
        if self.block_bits < 1:
            raise ConfigError(f"rate {rate} gives an empty block; raise n*c or the rate")
        source = SeededRandomSource(config.seed if seed is None else seed, trial)
        self.forward = ErasureChannel(config.forward, source.stream("forward"))
        self.feedback = ErasureChannel(config.feedback, source.stream("feedback"))
        self._source = source
        self.cycle = 0
        self.events: list[Event] = []
        self.record_events = record_events
        self.commit_use: list[int] = []

    def _log(self, phase: str, kind: str, block: int, use: int) -> None:
        if self.record_events:
            self.events.append(Event(self.cycle, phase, kind, block, use))

    def _commit(self, block: int, value: int, truth: int, use: int) -> None:
        if value != truth:
            raise ProtocolViolation(f"block {block} committed {value}, truth {truth}",
                                    self.trial, self.cycle)
        if block != len(self.commit_use) + 1:
            raise ProtocolViolation(f"block {block} committed out of order", self.trial, self.cycle)
        self.commit_use.append(use)

    def _heard(self) -> bool:
        """Run the ``k_b`` feedback uses of this cycle; True if any got through."""
        heard = False
        for _ in range(self.config.k_b):
            if not self.feedback.erased():
                heard = True
        return heard

    def step(self) -> None:
        raise NotImplementedError

    def run(self, cycles: int) -> "Scheme":
        step = self.step
        for _ in range(cycles):
            step()
        return self

    @property
    def committed_blocks(self) -> int:
        return len(self.commit_use)


# ---------------------------------------------------------------------------
# no-list scheme


@dataclass(slots=True)
class ForwardEncoderState:
    """Encoder side: pointer to the block on the air and whether it is acknowledged.

    Block 0 is the agreed dummy block (value 0) that both sides treat as
    decoded at time 0; the encoder idles on its codeword until block 1 arrives.
    """

    block: int = 0
    value: int = 0
    acked: bool = True
    start_use: int = 1
    codebook: Codebook | None = None


@dataclass(slots=True)
class DecoderState:
    """Decoder side: either unique on ``block`` or eliminating for ``block``."""

    block: int = 0
    unique: bool = True
    j_hat: int = 0
    codebook: Codebook | None = None
    candidates: np.ndarray | None = None
    committed: list[int] = field(default_factory=list)

    @property
    def last_decoded(self) -> int:
        return self.block if self.unique else self.block - 1


class NoListScheme(Scheme):
    """Rateless random coding with mod-2 block acknowledgments and no sequence numbers."""

    kind = SchemeKind.NOLIST

    def __init__(self, config: SystemConfig, rate: float, **kwargs):
        super().__init__(config, rate, **kwargs)
        if config.c_f > 63:
            raise ConfigError("simulated packets are limited to 63 bits")
        self.unit_bits = self.block_bits
        self._key = self._source.key64("codebook")
        self._truth = _Blocks(self._source.generator("message"), self.block_bits)
        dummy = Codebook(self._key, 0, 0, config.c_f)
        self.enc = ForwardEncoderState(codebook=dummy)
        self.dec = DecoderState(codebook=dummy)
        self._fb_bit = 0
        self._fb_pending = 0

    def _codebook(self, block: int) -> Codebook:
        return Codebook(self._key, block, self.block_bits, self.config.c_f)

    def step(self) -> None:
        nolist_step(self)


def nolist_step(s: NoListScheme) -> None:
    """One cycle of the no-list scheme.

    Forward: the encoder sends the next symbol of its current codeword,
    extending it indefinitely while no newer block is ready.  The decoder,
    if unique on block ``i``, watches for an unerased symbol contradicting
    its codeword, which marks the start of block ``i+1``; otherwise it
    eliminates.  Feedback: the decoder sends (last decoded block) mod 2 and
    the encoder advances once that matches its pointer.
    """
    cfg = s.config
    enc, dec = s.enc, s.dec
    t = s.cycle
    k_f = cfg.k_f

    if enc.acked and block_available_cycle(enc.block + 1, cfg) <= t:
        enc.block += 1
        enc.value = s._truth[enc.block]
        enc.acked = False
        enc.start_use = t * k_f + 1
        enc.codebook = s._codebook(enc.block)
        s._log("F", "start", enc.block, enc.start_use)

    fwd = s.forward
    for u in range(t * k_f + 1, (t + 1) * k_f + 1):
        if fwd.erased():
            continue
        if dec.unique:
            if enc.block == dec.block:
                continue  # encoder repeats the decoded codeword: nothing to detect
            y = enc.codebook.symbol(enc.value, u)
            if y == dec.codebook.symbol(dec.j_hat, u):
                continue
            dec.block += 1
            dec.unique = False
            dec.codebook = s._codebook(dec.block)
            members = np.arange(dec.codebook.message_count, dtype=np.int64)
            s._log("F", "detect", dec.block, u)
        else:
            y = enc.codebook.symbol(enc.value, u)
            members = dec.candidates
        dec.candidates = members = members[dec.codebook.symbols(members, u) == y]
        if members.size == 0:
            raise ProtocolViolation("truth eliminated", s.trial, t)
        if members.size == 1:
            dec.unique = True
            dec.j_hat = int(members[0])
            dec.candidates = None
            dec.committed.append(dec.j_hat)
            s._commit(dec.block, dec.j_hat, s._truth[dec.block], u)
            s._log("F", "decode", dec.block, u)

    bit = dec.last_decoded & 1
    if cfg.feedback_lag:
        bit, s._fb_pending = s._fb_pending, bit
    if s._heard() and not enc.acked and bit == (enc.block & 1):
        enc.acked = True
        s._log("B", "ack", enc.block, (t + 1) * k_f)

    gap = enc.block - dec.last_decoded
    if gap < 0 or gap > 1:
        raise ProtocolViolation(f"pointer gap {gap}", s.trial, t)
    s.cycle = t + 1


# ---------------------------------------------------------------------------
# list scheme


class _EncPhase(Enum):
    IDLE = 0
    CODEWORD = 1
    EXCHANGE = 2


@dataclass(slots=True)
class ListEncoderState:
    counter: int = 0
    phase: _EncPhase = _EncPhase.IDLE
    block: int = 0
    value: int = 0
    codebook: Codebook | None = None
    exchange: int = 0  # index of the encoder's current data slot in this block
    pos_bits: list[int] = field(default_factory=list)
    positions: list[int] = field(default_factory=list)
    payload: int = 0


@dataclass(slots=True)
class ListDecoderState:
    counter: int = 0
    block: int = 0
    candidates: np.ndarray | None = None
    codebook: Codebook | None = None
    members: tuple[int, ...] = ()
    positions: list[int] = field(default_factory=list)
    pos_bits: list[int] = field(default_factory=list)
    values: list[int] = field(default_factory=list)
    exchange: int = 0  # number of decoder counter increments in this block
    payload: int = 0


class ListScheme(Scheme):
    """List decoding to ``ell`` candidates, then interactive disambiguation.

    Every packet reserves one header bit for its sender's counter mod 2.
    The encoder always moves first: ``e = d + 1`` while it waits for the
    decoder, ``e = d`` once the decoder has followed.  Data in the forward
    direction rides on encoder increments, data in the feedback direction
    on decoder increments.  Per block, exchange ``x`` is encoder packet
    ``F_x`` followed by decoder packet ``B_x``:

    * ``F_0``: codeword symbols (``C_f - 1`` bits) until the list is ready.
    * ``B_x`` for ``x < P*L``: bit ``x`` of the distinguishing positions.
    * ``F_x`` for ``V0 <= x < V0 + P``: value bit ``x - V0``, with
      ``V0 = max(P*L, 1)``; other packets are plain acknowledgments.

    Here ``P = ell(ell-1)/2`` and ``L = ceil(log2 B)``.
    """

    kind = SchemeKind.LIST

    def __init__(self, config: SystemConfig, rate: float, **kwargs):
        super().__init__(config, rate, **kwargs)
        if config.c_f < 2 or config.c_b < 2:
            raise ConfigError("the list scheme needs C_f >= 2 and C_b >= 2 (one header bit each way)")
        if config.c_f - 1 > 63:
            raise ConfigError("simulated packets are limited to 64 bits")
        self.unit_bits = self.block_bits
        self.plan = RoundPlan(config.ell, self.block_bits)
        self._pos_len = self.plan.position_rounds
        self._v0 = max(self._pos_len, 1)
        self._last = self._v0 + self.plan.value_rounds  # exchanges per block
        self._key = self._source.key64("codebook")
        self._truth = _Blocks(self._source.generator("message"), self.block_bits)
        self.enc = ListEncoderState()
        self.dec = ListDecoderState()
        self._fb_pending = (0, 0)

    def _codebook(self, block: int) -> Codebook:
        return Codebook(self._key, block, self.block_bits, self.config.c_f - 1)

    def step(self) -> None:
        list_step(self)


def _decoder_on_forward(s: ListScheme, payload: int, u: int) -> None:
    """Decoder reaction to an unerased forward packet carrying a new encoder counter."""
    dec = s.dec
    if dec.candidates is not None:  # round 1
        members = dec.candidates
        dec.candidates = members = members[dec.codebook.symbols(members, u) == payload]
        if members.size == 0:
            raise ProtocolViolation("truth eliminated", s.trial, s.cycle)
        if members.size > s.plan.ell:
            return
        dec.members = tuple(int(j) for j in members)
        dec.candidates = None
        dec.positions = distinguishing_positions(dec.members, s.plan.pairs)
        dec.pos_bits = position_bits(dec.positions, s.plan.position_width)
        dec.values = []
        s._log("F", "list", dec.block, u)
        dec.payload = dec.pos_bits[0] if s._pos_len else 0
        dec.exchange = 1
        dec.counter += 1
        if s.plan.value_rounds == 0:
            _decoder_commit(s, u)
        return
    x = dec.exchange
    if x < s._v0:
        dec.payload = dec.pos_bits[x]  # F_x acknowledged B_{x-1}; send the next position bit
    else:
        dec.values.append(payload & 1)
        dec.payload = 0
        if len(dec.values) == s.plan.value_rounds:
            _decoder_commit(s, u)
    dec.exchange = x + 1
    dec.counter += 1


def _decoder_commit(s: ListScheme, u: int) -> None:
    dec = s.dec
    value = resolve_list(dec.members, dec.positions, dec.values)
    s._commit(dec.block, value, s._truth[dec.block], u)
    s._log("F", "commit", dec.block, u)


def _encoder_on_feedback(s: ListScheme, payload: int) -> None:
    """Encoder reaction to feedback showing the decoder has caught up."""
    enc = s.enc
    x = enc.exchange
    if x < s._pos_len:
        enc.pos_bits.append(payload & 1)
        if len(enc.pos_bits) == s._pos_len:
            enc.positions = bits_to_positions(enc.pos_bits, s.plan.position_width, s.plan.pairs)
    nxt = x + 1
    if nxt >= s._last:
        enc.phase = _EncPhase.IDLE
        s._log("B", "done", enc.block, (s.cycle + 1) * s.config.k_f)
        return
    if nxt < s._v0:
        enc.payload = 0
    else:
        if s._pos_len == 0 and not enc.positions:
            enc.positions = [0] * s.plan.pairs
        enc.payload = (enc.value >> enc.positions[nxt - s._v0]) & 1
    enc.phase = _EncPhase.EXCHANGE
    enc.exchange = nxt
    enc.counter += 1


def list_step(s: ListScheme) -> None:
    """One cycle of the list scheme (see :class:`ListScheme` for the round layout)."""
    cfg = s.config
    enc, dec = s.enc, s.dec
    t = s.cycle
    k_f = cfg.k_f

    if enc.phase is _EncPhase.IDLE and block_available_cycle(enc.block + 1, cfg) <= t:
        enc.block += 1
        enc.value = s._truth[enc.block]
        enc.codebook = s._codebook(enc.block)
        enc.phase = _EncPhase.CODEWORD
        enc.exchange = 0
        enc.pos_bits = []
        enc.positions = []
        enc.counter += 1
        s._log("F", "start", enc.block, t * k_f + 1)

    fwd = s.forward
    for u in range(t * k_f + 1, (t + 1) * k_f + 1):
        if fwd.erased():
            continue
        if (enc.counter & 1) == (dec.counter & 1):
            continue  # nothing new from the encoder
        if enc.phase is _EncPhase.CODEWORD:
            payload = enc.codebook.symbol(enc.value, u)
        else:
            payload = enc.payload
        if dec.exchange == 0 and dec.candidates is None:
            # first packet with a new counter while between blocks: a new codeword
            dec.block += 1
            dec.codebook = s._codebook(dec.block)
            dec.candidates = np.arange(dec.codebook.message_count, dtype=np.int64)
        _decoder_on_forward(s, payload, u)
        if dec.exchange >= s._last:
            dec.exchange = 0

    header, payload = dec.counter & 1, dec.payload
    if cfg.feedback_lag:
        (header, payload), s._fb_pending = s._fb_pending, (header, payload)
    if s._heard() and enc.phase is not _EncPhase.IDLE and header == (enc.counter & 1):
        _encoder_on_feedback(s, payload)

    gap = enc.counter - dec.counter
    if gap < 0 or gap > 1:
        raise ProtocolViolation(f"round counter gap {gap}", s.trial, t)
    s.cycle = t + 1


# ---------------------------------------------------------------------------
# ARQ baseline


@dataclass(slots=True)
class ArqState:
    """Sender holds one pending packet with a 1-bit sequence number."""

    packet: int = 0  # index of the pending packet (0 = none yet)
    seq: int = 1  # flipped before the first packet, which goes out with 0
    payload: int = 0
    pending: bool = False
    last_accepted_seq: int = 1
    accepted: int = 0
    received_this_cycle: bool = False


class ArqScheme(Scheme):
    """Repeat until a cycle where the packet and its acknowledgment both get through.

    Packets carry ``C_f - 1`` payload bits plus a sequence bit.  The
    feedback bit acknowledges only the current cycle's reception, so the
    sender advances with probability ``(1 - beta_f^k_f)(1 - beta_b^k_b)``
    per cycle; the receiver drops duplicates by sequence bit.
    """

    kind = SchemeKind.ARQ

    def __init__(self, config: SystemConfig, rate: float, **kwargs):
        super().__init__(config, rate, **kwargs)
        if config.c_f < 2:
            raise ConfigError("ARQ needs C_f >= 2 (one sequence bit plus payload)")
        self.unit_bits = config.c_f - 1
        self._truth = _Blocks(self._source.generator("message"), self.unit_bits)
        self._span = config.n * config.c * config.k_f
        self.state = ArqState()
        self._fb_pending = False

    def packet_available_use(self, packet: int) -> int:
        """Forward use by which the last bit of ``packet`` has arrived."""
        return -(-packet * self.unit_bits * self._span // self.block_bits)

    def step(self) -> None:
        arq_step(self)


def arq_step(s: ArqScheme) -> None:
    cfg = s.config
    st = s.state
    t = s.cycle
    k_f = cfg.k_f

    if not st.pending and s.packet_available_use(st.packet + 1) <= t * k_f:
        st.packet += 1
        st.seq ^= 1
        st.payload = s._truth[st.packet]
        st.pending = True
        s._log("F", "start", st.packet, t * k_f + 1)

    received = False
    for u in range(t * k_f + 1, (t + 1) * k_f + 1):
        if s.forward.erased() or not st.pending:
            continue
        received = True
        arq_receive(s, st.seq, st.payload, u)

    ack = received
    if cfg.feedback_lag:
        ack, s._fb_pending = s._fb_pending, ack
    if s._heard() and ack and st.pending:
        st.pending = False
        s._fb_pending = False  # a lagged ack never carries over to the next packet
        s._log("B", "done", st.packet, (t + 1) * k_f)
    s.cycle = t + 1


def arq_receive(s: ArqScheme, seq: int, payload: int, use: int) -> bool:
    """Receiver side: accept iff the sequence bit is new.  Returns True on acceptance."""
    st = s.state
    if seq == st.last_accepted_seq:
        return False
    st.last_accepted_seq = seq
    st.accepted += 1
    s._commit(st.accepted, payload, s._truth[st.accepted], use)
    s._log("F", "accept", st.accepted, use)
    return True


# ---------------------------------------------------------------------------

_SCHEMES = {SchemeKind.NOLIST: NoListScheme, SchemeKind.LIST: ListScheme, SchemeKind.ARQ: ArqScheme}

_STAGES = {
    SchemeKind.NOLIST: ("start", "detect", "decode", "ack"),
    SchemeKind.LIST: ("start", "list", "commit", "done"),
    SchemeKind.ARQ: ("start", None, "accept", "done"),
}


def make_scheme(kind: SchemeKind | str, config: SystemConfig, rate: float, **kwargs) -> Scheme:
    return _SCHEMES[SchemeKind(kind)](config, rate, **kwargs)


def measure_service_components(events: list[Event], kind: SchemeKind | str,
                               k_f: int) -> list[ServiceTimeSample]:
    """Per-block (T1, T2, T3) from an event log; blocks not fully served are skipped.

    Stage boundaries are the first four events of each block in order
    (start, detection or list, decode or commit, acknowledgment).  T1 and
    T2 count forward uses inclusively from the block start; T3 counts
    whole cycles from the decode cycle through the cycle whose feedback
    the encoder heard, times ``k_f``.
    """
    start_k, first_k, decode_k, ack_k = _STAGES[SchemeKind(kind)]
    seen: dict[int, dict[str, Event]] = {}
    for ev in events:
        seen.setdefault(ev.block, {}).setdefault(ev.kind, ev)
    out = []
    for block in sorted(seen):
        marks = seen[block]
        if block == 0 or start_k not in marks or decode_k not in marks or ack_k not in marks:
            continue
        start, decode, ack = marks[start_k], marks[decode_k], marks[ack_k]
        if first_k is None:
            t1, t2 = 0, decode.use - start.use + 1
        else:
            first = marks[first_k]
            t1 = first.use - start.use + 1
            t2 = decode.use - first.use
        t3 = k_f * (ack.cycle - decode.cycle + 1)
        out.append(ServiceTimeSample(block, t1, t2, t3))
    return out
