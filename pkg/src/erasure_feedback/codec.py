"""Rateless random codebooks and elimination (list) decoding over erasures.

Codeword symbols ``X_i(j, t)`` come from a keyed counter-based hash
(splitmix64 finalizer), so encoder and decoder regenerate the same codebook
from the shared key without storing it, and each block index ``i`` gets an
independent codebook.  The scalar path (pure Python ints) and the
vectorized path (numpy uint64) produce identical symbols.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .channel import ERASED_SYMBOL, Packet
from .params import MAX_BLOCK_BITS, ConfigError

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

_U_GOLDEN = np.uint64(_GOLDEN)
_U_M1 = np.uint64(_M1)
_U_M2 = np.uint64(_M2)
_S30, _S27, _S31 = np.uint64(30), np.uint64(27), np.uint64(31)


def mix64(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _S30)) * _U_M1
    z = (z ^ (z >> _S27)) * _U_M2
    return z ^ (z >> _S31)


class Codebook:
    """Infinite-length random codebook for one message block.

    ``symbol(j, t)`` is the ``width``-bit symbol of message ``j`` at forward
    use ``t``; it is a pure function of ``(key, block_index, j, t)``.
    """

    __slots__ = ("key", "block_index", "message_bits", "width", "_block_key",
                 "_shift", "_t", "_time_key")

    def __init__(self, key: int, block_index: int, message_bits: int, width: int):
        if not (0 <= message_bits <= MAX_BLOCK_BITS):
            raise ConfigError(f"message_bits must lie in [0, {MAX_BLOCK_BITS}], got {message_bits}")
        if not (1 <= width <= 63):
            raise ConfigError(f"symbol width must lie in [1, 63], got {width}")
        self.key = key
        self.block_index = block_index
        self.message_bits = message_bits
        self.width = width
        self._block_key = mix64(key + (block_index + 1) * _GOLDEN)
        self._shift = 64 - width
        self._t = -1
        self._time_key = 0

    @property
    def message_count(self) -> int:
        return 1 << self.message_bits

    def _key_at(self, t: int) -> int:
        if t != self._t:
            self._t = t
            self._time_key = mix64(self._block_key + t * _GOLDEN)
        return self._time_key

    def symbol(self, j: int, t: int) -> int:
        return mix64(self._key_at(t) + (j + 1) * _GOLDEN) >> self._shift

    def symbols(self, js: np.ndarray, t: int) -> np.ndarray:
        base = np.uint64(self._key_at(t))
        z = base + (js.astype(np.uint64) + np.uint64(1)) * _U_GOLDEN
        return (mix64_array(z) >> np.uint64(self._shift)).astype(np.int64)


def encode_symbol(cb: Codebook, j: int, t: int) -> Packet:
    """Channel input for message ``j`` at forward use ``t``."""
    if not (0 <= j < cb.message_count):
        raise ConfigError(f"message {j} outside [0, {cb.message_count})")
    return Packet(cb.symbol(j, t), cb.width)


@dataclass(frozen=True)
class CandidateSet:
    """Messages still consistent with everything the decoder has received."""

    members: np.ndarray

    @classmethod
    def full(cls, message_count: int) -> "CandidateSet":
        return cls(np.arange(message_count, dtype=np.int64))

    def __len__(self) -> int:
        return int(self.members.size)

    def __contains__(self, j: int) -> bool:
        idx = np.searchsorted(self.members, j)
        return bool(idx < self.members.size and self.members[idx] == j)


def eliminate_members(members: np.ndarray, cb: Codebook, t: int, y: int) -> np.ndarray:
    """Array form of :func:`eliminate` with an integer channel output."""
    if y == ERASED_SYMBOL:
        return members
    return members[cb.symbols(members, t) == y]


def eliminate(cs: CandidateSet, cb: Codebook, t: int, y: Packet | int) -> CandidateSet:
    """Drop every candidate whose symbol at ``t`` disagrees with the received one."""
    out = y if isinstance(y, int) else (ERASED_SYMBOL if y.erased else y.payload)
    members = eliminate_members(cs.members, cb, t, out)
    return cs if members is cs.members else CandidateSet(members)


class DecodeState(str, Enum):
    UNDECIDED = "undecided"
    LIST_READY = "list_ready"
    UNIQUE = "unique"


def decode_status(cs: CandidateSet, ell: int) -> tuple[DecodeState, tuple[int, ...]]:
    """Classify the candidate set against list size ``ell``."""
    if ell < 1:
        raise ConfigError("list size must be at least 1")
    size = len(cs)
    if size == 0:
        raise AssertionError("empty candidate set: the transmitted message was eliminated")
    if size == 1:
        return DecodeState.UNIQUE, (int(cs.members[0]),)
    if size <= ell:
        return DecodeState.LIST_READY, tuple(int(j) for j in cs.members)
    return DecodeState.UNDECIDED, ()


def detect_new_block(j_hat: int, cb: Codebook, t: int, y: Packet | int) -> bool:
    """True iff an unerased output contradicts the decoded codeword of the current block."""
    out = y if isinstance(y, int) else (ERASED_SYMBOL if y.erased else y.payload)
    return out != ERASED_SYMBOL and out != cb.symbol(j_hat, t)


# ---------------------------------------------------------------------------
# list disambiguation helpers


def distinguishing_positions(members: tuple[int, ...], count: int) -> list[int]:
    """Lowest differing bit of each list pair (lexicographic), padded with 0 to ``count``."""
    positions = []
    for a_idx in range(len(members)):
        for b_idx in range(a_idx + 1, len(members)):
            diff = members[a_idx] ^ members[b_idx]
            positions.append((diff & -diff).bit_length() - 1)
    if len(positions) > count:
        raise ConfigError(f"{len(members)} list members need more than {count} positions")
    return positions + [0] * (count - len(positions))


def position_bits(positions: list[int], width: int) -> list[int]:
    """Concatenated ``width``-bit big-endian encodings of the positions."""
    return [(p >> (width - 1 - k)) & 1 for p in positions for k in range(width)]


def bits_to_positions(bits: list[int], width: int, count: int) -> list[int]:
    """Inverse of :func:`position_bits`; ``width == 0`` means every position is bit 0."""
    if width == 0:
        return [0] * count
    out = []
    for start in range(0, len(bits), width):
        value = 0
        for b in bits[start:start + width]:
            value = (value << 1) | b
        out.append(value)
    return out


def resolve_list(members: tuple[int, ...], positions: list[int], values: list[int]) -> int:
    """The unique list member agreeing with every (position, value) pair."""
    survivors = [j for j in members if all(((j >> p) & 1) == v for p, v in zip(positions, values))]
    if len(survivors) != 1:
        raise AssertionError(f"list disambiguation left {len(survivors)} candidates")
    return survivors[0]
