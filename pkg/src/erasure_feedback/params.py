"""Value types shared by the analytic and simulation layers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction

#: Largest block size (in bits) the exhaustive-elimination decoder accepts.
MAX_BLOCK_BITS = 20


class ConfigError(ValueError):
    """Raised for parameter combinations outside a model's domain."""


class Units(str, Enum):
    """How channel uses are counted when expressing rates and exponents."""

    FORWARD = "forward"
    TOTAL = "total"
    WEIGHTED = "weighted"


def _check_probability(name: str, value: float) -> None:
    if not (0.0 <= value <= 1.0) or math.isnan(value):
        raise ConfigError(f"{name} must lie in [0, 1], got {value!r}")


@dataclass(frozen=True)
class ErasureParams:
    """One direction of a packet-erasure link: erasure probability and packet size.

    ``c_bits`` may be ``math.inf`` for the large-packet limit used by some
    analytic curves; simulations always need a finite integer.
    """

    beta: float
    c_bits: float

    def __post_init__(self) -> None:
        _check_probability("beta", self.beta)
        if not (self.c_bits >= 1):
            raise ConfigError(f"c_bits must be >= 1, got {self.c_bits!r}")
        if not math.isinf(self.c_bits) and int(self.c_bits) != self.c_bits:
            raise ConfigError(f"c_bits must be an integer or inf, got {self.c_bits!r}")

    @property
    def capacity(self) -> float:
        """Capacity in packets per channel use."""
        return 1.0 - self.beta


@dataclass(frozen=True)
class SystemConfig:
    """The six-tuple ``(k_f, k_b, C_f, C_b, beta_f, beta_b)`` plus simulation knobs.

    ``n`` and ``c`` size the message blocks (``n*c`` cycles of arrivals per
    block), ``ell`` is the list size of the list-decoding scheme and
    ``feedback_lag`` selects whether the feedback sent in cycle ``t`` reflects
    forward outputs of the same cycle (0) or only of the previous one (1).
    """

    k_f: int = 1
    k_b: int = 1
    c_f: int = 4
    c_b: int = 1
    beta_f: float = 0.25
    beta_b: float = 0.25
    n: int = 1
    c: int = 1
    ell: int = 1
    seed: int = 0
    feedback_lag: int = 0

    def __post_init__(self) -> None:
        for name in ("k_f", "k_b", "c_f", "c_b", "n", "c", "ell"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        _check_probability("beta_f", self.beta_f)
        _check_probability("beta_b", self.beta_b)
        if not isinstance(self.seed, int) or not (0 <= self.seed < 2**64):
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if self.feedback_lag not in (0, 1):
            raise ConfigError(f"feedback_lag must be 0 or 1, got {self.feedback_lag!r}")

    @property
    def forward(self) -> ErasureParams:
        return ErasureParams(self.beta_f, self.c_f)

    @property
    def feedback(self) -> ErasureParams:
        return ErasureParams(self.beta_b, self.c_b)

    @property
    def feedback_exponent(self) -> float:
        """Feedback-outage exponent ``-(k_b/k_f) ln beta_b`` per forward use."""
        if self.beta_b == 0.0:
            return math.inf
        return -(self.k_b / self.k_f) * math.log(self.beta_b)

    def block_bits(self, rate: float) -> int:
        """Bits per message block, ``floor(n c k_f R C_f)``."""
        return math.floor(self.n * self.c * self.k_f * rate * self.c_f + 1e-9)

    def bits_per_cycle(self, rate: float) -> Fraction:
        """Realized arrival rate (bits per cycle) after block rounding."""
        return Fraction(self.block_bits(rate), self.n * self.c)

    def realized_rate(self, rate: float) -> float:
        """Realized rate in forward packets per forward use."""
        return self.block_bits(rate) / (self.n * self.c * self.k_f * self.c_f)

    def with_(self, **changes) -> "SystemConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class RegionPoint:
    """A (rate, exponent) pair tagged with the unit system it is expressed in.

    Mixed tradeoffs (rate and exponent counted differently) set
    ``exponent_units``; otherwise it follows ``units``.
    """

    rate: float
    exponent: float
    units: Units = Units.FORWARD
    exponent_units: Units | None = field(default=None)

    def __post_init__(self) -> None:
        if self.rate < 0 or self.exponent < 0:
            raise ConfigError(f"rate and exponent must be nonnegative: {self}")
        if self.exponent_units is None:
            object.__setattr__(self, "exponent_units", self.units)
