"""Seeded packet-erasure channels and the forward/feedback cycle clock."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .params import ConfigError, ErasureParams

#: Channel output for an erased packet.
ERASED_SYMBOL = -1

_STREAM_KEYS = {"forward": 0, "feedback": 1, "codebook": 2, "message": 3}


@dataclass(frozen=True)
class Packet:
    """A ``width``-bit packet, or the erasure mark when ``payload`` is ``None``."""

    payload: int | None
    width: int

    def __post_init__(self) -> None:
        if self.payload is not None and not (0 <= self.payload < (1 << self.width)):
            raise ConfigError(f"payload {self.payload} does not fit in {self.width} bits")

    @property
    def erased(self) -> bool:
        return self.payload is None

    @classmethod
    def erasure(cls, width: int) -> "Packet":
        return cls(None, width)


class UniformStream:
    """Buffered stream of uniform variates from one named generator."""

    __slots__ = ("_rng", "_buf", "_pos", "_chunk")

    def __init__(self, rng: np.random.Generator, chunk: int = 4096):
        self._rng = rng
        self._chunk = chunk
        self._buf: list[float] = []
        self._pos = 0

    def uniform(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self._rng.random(self._chunk).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u

    @property
    def generator(self) -> np.random.Generator:
        return self._rng


class SeededRandomSource:
    """Independent named random streams derived from one root seed.

    Streams are keyed by name through ``numpy.random.SeedSequence`` spawn
    keys, so the same (seed, trial) always reproduces the same draws and
    different names never share state.
    """

    def __init__(self, seed: int, trial: int = 0):
        self.seed = seed
        self.trial = trial

    def _sequence(self, name: str) -> np.random.SeedSequence:
        try:
            key = _STREAM_KEYS[name]
        except KeyError:
            raise ConfigError(f"unknown random stream {name!r}") from None
        return np.random.SeedSequence(self.seed, spawn_key=(self.trial, key))

    def generator(self, name: str) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self._sequence(name)))

    def stream(self, name: str) -> UniformStream:
        return UniformStream(self.generator(name))

    def key64(self, name: str) -> int:
        """A 64-bit key for counter-based generators (codebooks)."""
        return int(self._sequence(name).generate_state(1, dtype=np.uint64)[0])


class ErasureChannel:
    """A memoryless C-bit erasure channel drawing one uniform per use."""

    __slots__ = ("params", "beta", "width", "_stream", "uses", "erasures")

    def __init__(self, params: ErasureParams, stream: UniformStream):
        self.params = params
        self.beta = params.beta
        self.width = int(params.c_bits)
        self._stream = stream
        self.uses = 0
        self.erasures = 0

    def erased(self) -> bool:
        """Advance the channel by one use and report whether it erased."""
        self.uses += 1
        if self._stream.uniform() < self.beta:
            self.erasures += 1
            return True
        return False

    def deliver(self, payload: int) -> int:
        """Integer fast path: the payload, or ``ERASED_SYMBOL``."""
        return ERASED_SYMBOL if self.erased() else payload


def transmit(channel: ErasureChannel, x: Packet) -> Packet:
    """Send one packet: delivered intact with probability ``1-beta``, else erased."""
    if x.erased:
        raise ConfigError("cannot transmit an erasure mark")
    if x.width != channel.width:
        raise ConfigError(f"packet width {x.width} does not match channel width {channel.width}")
    return Packet.erasure(x.width) if channel.erased() else x


class Phase(str, Enum):
    FORWARD = "F"
    FEEDBACK = "B"


@dataclass(frozen=True)
class CycleClock:
    """Position in the cycle timeline: ``k_f`` forward uses, then ``k_b`` feedback uses."""

    cycle: int = 0
    phase: Phase = Phase.FORWARD
    use: int = 1


def forward_use_index(cycle: int, k_f: int, use: int) -> int:
    """1-based global index of forward use ``use`` (1..k_f) in ``cycle``."""
    return cycle * k_f + use


def advance_clock(clock: CycleClock, k_f: int, k_b: int) -> CycleClock:
    """Step to the next channel use in the fixed forward-then-feedback order."""
    if clock.phase is Phase.FORWARD:
        if clock.use < k_f:
            return CycleClock(clock.cycle, Phase.FORWARD, clock.use + 1)
        return CycleClock(clock.cycle, Phase.FEEDBACK, 1)
    if clock.use < k_b:
        return CycleClock(clock.cycle, Phase.FEEDBACK, clock.use + 1)
    return CycleClock(clock.cycle + 1, Phase.FORWARD, 1)
