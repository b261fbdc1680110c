"""Closed-form exponents, rate bounds and achievable regions.

All exponents are in nats per channel use and all rates in packets of
``C_f`` bits per channel use.  The coding-exponent rate term is written as
``rho * R * C * ln 2`` so that it is in nats as well, matching the
``R < E_0(C, rho) / (rho C ln 2)`` form of the parametric regions.

Functions here are pure and accept plain floats; ``gallager_e0`` is also
vectorized over ``rho``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .params import ConfigError, ErasureParams, RegionPoint, SystemConfig, Units

LN2 = math.log(2.0)


class DomainError(ConfigError):
    """An argument lies outside the domain where a bound is defined."""


class Theorem3Variant(str, Enum):
    NO_LIST = "nolist"
    LIST = "list"
    MIXED_RBAR = "mixed_rbar"
    MIXED_BOTH = "mixed_both"


# ---------------------------------------------------------------------------
# Gallager function and the parametric rate it induces


def gallager_e0(c_bits: float, rho, beta: float):
    """Gallager function ``-ln(beta + 2^(-rho C) (1 - beta))`` of a C-bit erasure channel."""
    rho_arr = np.asarray(rho, dtype=float)
    if np.any(rho_arr < 0):
        raise DomainError("rho must be nonnegative")
    if beta == 0.0:
        out = rho_arr * c_bits * LN2
    elif math.isinf(c_bits):
        out = np.where(rho_arr > 0, -math.log(beta), 0.0)
    else:
        # 1 - (1-beta)(1 - 2^(-rho C)), written to stay accurate near rho = 0
        shrink = -np.expm1(-rho_arr * c_bits * LN2)
        out = -np.log1p(-(1.0 - beta) * shrink)
    return float(out) if np.ndim(out) == 0 else out


def _parametric_rate(c_code: float, c_norm: float, rho: float, beta: float) -> float:
    """``E_0(c_code, rho) / (rho c_norm ln 2)`` with its rho -> 0 limit."""
    if rho == 0.0:
        return (1.0 - beta) * c_code / c_norm
    return gallager_e0(c_code, rho, beta) / (rho * c_norm * LN2)


# ---------------------------------------------------------------------------
# Perfect-feedback bound and its inverse


def focusing_bound_rate(alpha: float, beta_f: float) -> float:
    """Largest rate supporting fixed-delay exponent ``alpha`` with perfect feedback."""
    if alpha < 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    if beta_f >= 1.0:
        raise DomainError("a forward channel that always erases supports no exponent")
    if alpha == 0.0:
        return 1.0 - beta_f
    if beta_f == 0.0:
        return 1.0
    limit = -math.log(beta_f)
    if alpha >= limit:
        raise DomainError(f"alpha={alpha} must be below -ln(beta_f)={limit}")
    # 1 - e^alpha beta, computed without cancellation near the limit
    slack = -math.expm1(alpha + math.log(beta_f))
    if slack <= 0.0:
        return 0.0
    log_term = math.log1p(beta_f * math.expm1(alpha) / slack)
    return alpha / (alpha + log_term)


def focusing_bound_exponent(rate: float, beta_f: float) -> float:
    """Inverse of :func:`focusing_bound_rate`: the exponent reachable at ``rate``."""
    if beta_f == 0.0:
        return math.inf if rate < 1.0 else 0.0
    capacity = 1.0 - beta_f
    if rate >= capacity:
        return 0.0
    limit = -math.log(beta_f)
    if rate <= 0.0:
        return limit
    hi = limit * (1.0 - 1e-15)
    if focusing_bound_rate(hi, beta_f) >= rate:
        return hi
    return brentq(lambda a: focusing_bound_rate(a, beta_f) - rate, 0.0, hi, xtol=1e-14, rtol=1e-14)


# ---------------------------------------------------------------------------
# Free-feedback achievable regions


def _check_rho(rho: float, upper: float) -> None:
    if not (0.0 <= rho <= upper):
        raise DomainError(f"rho must lie in [0, {upper}], got {rho}")


def theorem1_region(config: SystemConfig, rho: float) -> RegionPoint:
    """Point of the no-list region at parameter ``rho`` in [0, 1]."""
    _check_rho(rho, 1.0)
    e0 = gallager_e0(config.c_f, rho, config.beta_f)
    rate = _parametric_rate(config.c_f, config.c_f, rho, config.beta_f)
    return RegionPoint(rate, min(config.feedback_exponent, e0), Units.FORWARD)


def theorem2_region(config: SystemConfig, rho: float) -> RegionPoint:
    """Point of the list-decoding region at ``rho >= 0``; needs ``C_f, C_b >= 2``."""
    if config.c_f < 2 or config.c_b < 2:
        raise DomainError("the list scheme needs C_f >= 2 and C_b >= 2 for its header bit")
    _check_rho(rho, math.inf)
    e0 = gallager_e0(config.c_f - 1, rho, config.beta_f)
    rate = _parametric_rate(config.c_f - 1, config.c_f, rho, config.beta_f)
    return RegionPoint(rate, min(config.feedback_exponent, e0), Units.FORWARD)


def _solve_rho(rate_of_rho, rate: float, rho_max: float) -> float:
    """Largest rho in [0, rho_max] with ``rate_of_rho(rho) >= rate`` (rate decreasing in rho)."""
    if rate_of_rho(0.0) <= rate:
        return 0.0
    if math.isinf(rho_max):
        hi = 1.0
        while rate_of_rho(hi) > rate:
            hi *= 2.0
            if hi > 1e6:
                return hi
    else:
        hi = rho_max
        if rate_of_rho(hi) >= rate:
            return hi
    return brentq(lambda r: rate_of_rho(r) - rate, 0.0, hi, xtol=1e-13, rtol=1e-13)


def theorem1_exponent_at(rate: float, beta_f: float, beta_b: float, c_f: float,
                         k_f: int = 1, k_b: int = 1) -> float:
    """No-list exponent reachable at ``rate``; ``c_f`` may be ``inf`` (large-packet limit)."""
    feedback_arm = math.inf if beta_b == 0 else -(k_b / k_f) * math.log(beta_b)
    if rate >= 1.0 - beta_f:
        return 0.0
    if math.isinf(c_f):
        return min(feedback_arm, focusing_bound_exponent(rate, beta_f))
    rho = _solve_rho(lambda r: _parametric_rate(c_f, c_f, r, beta_f), rate, 1.0)
    return min(feedback_arm, gallager_e0(c_f, rho, beta_f))


def theorem2_exponent_at(rate: float, beta_f: float, beta_b: float, c_f: int,
                         k_f: int = 1, k_b: int = 1) -> float:
    """List-scheme exponent reachable at ``rate`` (rho unbounded above)."""
    if c_f < 2:
        raise DomainError("the list scheme needs C_f >= 2")
    feedback_arm = math.inf if beta_b == 0 else -(k_b / k_f) * math.log(beta_b)
    if rate >= (1.0 - beta_f) * (c_f - 1) / c_f:
        return 0.0
    if rate <= 0.0:
        return min(feedback_arm, -math.log(beta_f) if beta_f > 0 else math.inf)
    rho = _solve_rho(lambda r: _parametric_rate(c_f - 1, c_f, r, beta_f), rate, math.inf)
    return min(feedback_arm, gallager_e0(c_f - 1, rho, beta_f))


# ---------------------------------------------------------------------------
# Forward-only baselines


def _maximize_concave(objective, lo: float, hi: float, step: float = 1e-3) -> float:
    """Grid search then bounded Brent refinement of a unimodal objective on [lo, hi]."""
    count = max(int(math.ceil((hi - lo) / step)), 2)
    grid = np.linspace(lo, hi, count + 1)
    values = objective(grid)
    k = int(np.argmax(values))
    best = float(values[k])
    left, right = grid[max(k - 1, 0)], grid[min(k + 1, count)]
    if right > left:
        res = minimize_scalar(lambda r: -float(objective(r)), bounds=(left, right),
                              method="bounded", options={"xatol": 1e-10})
        best = max(best, -float(res.fun))
    return best


def random_coding_exponent(rate: float, params: ErasureParams) -> float:
    """``max over rho in [0,1]`` of ``E_0(C, rho) - rho R C ln 2``."""
    if rate < 0:
        raise DomainError("rate must be nonnegative")
    if rate >= params.capacity:
        return 0.0
    if math.isinf(params.c_bits):
        return sphere_packing_exponent(rate, params)
    c, beta = params.c_bits, params.beta
    return max(0.0, _maximize_concave(lambda r: gallager_e0(c, r, beta) - r * rate * c * LN2, 0.0, 1.0))


def sphere_packing_exponent(rate: float, params: ErasureParams) -> float:
    """``sup over rho >= 0`` of ``E_0(C, rho) - rho R C ln 2``.

    The objective depends on rho only through ``rho*C``, so it is evaluated in
    that variable and the result is the same for every packet size.
    """
    if rate < 0:
        raise DomainError("rate must be nonnegative")
    if rate >= params.capacity:
        return 0.0
    beta = params.beta
    if beta == 0.0:
        return math.inf
    if rate == 0.0:
        return -math.log(beta)

    def objective(s):
        return gallager_e0(1, s, beta) - s * rate * LN2

    hi = 1.0
    while objective(2.0 * hi) >= objective(hi):
        hi *= 2.0
    return max(0.0, _maximize_concave(objective, 0.0, 2.0 * hi, step=2.0 * hi / 1000))


# ---------------------------------------------------------------------------
# Pure-feedback (repeat until success) baseline


def arq_alpha_limits(beta_f: float, beta_b: float) -> tuple[float, float]:
    """Return the exponent range endpoints ``(stated, natural)`` for the ARQ bound.

    ``stated`` is ``-ln((1-beta_f)(1-beta_b))``; ``natural`` is where the
    formula's rate reaches zero, ``-ln(1 - (1-beta_f)(1-beta_b))``.  The
    function :func:`arq_bound_rate` accepts the natural range.
    """
    success = (1.0 - beta_f) * (1.0 - beta_b)
    stated = -math.log(success) if success > 0 else math.inf
    natural = -math.log(1.0 - success) if success < 1 else math.inf
    return stated, natural


def _header_factor(c_f: float) -> float:
    return 1.0 if math.isinf(c_f) else (c_f - 1) / c_f


def arq_bound_rate(alpha: float, c_f: float, beta_f: float, beta_b: float) -> float:
    """Rate supported with exponent ``alpha`` by 1-bit-sequence-number ARQ.

    Equivalent to the perfect-feedback bound at effective erasure
    probability ``1 - (1-beta_f)(1-beta_b)`` scaled by ``(C_f-1)/C_f``.
    """
    if c_f < 2:
        raise DomainError("ARQ needs C_f >= 2 to carry the sequence bit")
    effective = 1.0 - (1.0 - beta_f) * (1.0 - beta_b)
    return _header_factor(c_f) * focusing_bound_rate(alpha, effective)


def arq_exponent_at(rate: float, c_f: float, beta_f: float, beta_b: float) -> float:
    effective = 1.0 - (1.0 - beta_f) * (1.0 - beta_b)
    return focusing_bound_exponent(rate / _header_factor(c_f), effective)


# ---------------------------------------------------------------------------
# Shared forward/feedback resource


def balanced_e0(c_f: float, rho: float, beta_f: float, beta_b: float | None = None) -> float:
    """Harmonic combination of the coding exponent and the feedback outage exponent.

    The outage arm is ``-ln beta_b``; when ``beta_b`` is omitted it is taken
    equal to ``beta_f``.
    """
    beta_out = beta_f if beta_b is None else beta_b
    e0 = gallager_e0(c_f, rho, beta_f)
    if beta_out == 0.0:
        return e0
    if e0 == 0.0:
        return 0.0
    return 1.0 / (1.0 / -math.log(beta_out) + 1.0 / e0)


def optimal_split(c_f: float, rho: float, beta_f: float, beta_b: float) -> float:
    """Forward share ``eta_f*`` that equalizes ``eta_f E_0`` and ``-(1-eta_f) ln beta_b``."""
    if rho <= 0:
        raise DomainError("rho must be positive")
    if beta_b == 0.0:
        return 1.0
    outage = -math.log(beta_b)
    return outage / (gallager_e0(c_f, rho, beta_f) + outage)


def theorem3_regions(c_f: int, c_b: int, beta_f: float, beta_b: float, rho: float,
                     variant: Theorem3Variant | str) -> RegionPoint:
    """Point of the shared-resource regions for the chosen unit convention."""
    variant = Theorem3Variant(variant)
    if beta_f <= 0 or beta_b <= 0:
        raise DomainError("the shared-resource regions assume beta_f, beta_b > 0")
    if variant is Theorem3Variant.LIST:
        if c_f < 2 or c_b < 2:
            raise DomainError("the list variant needs C_f >= 2 and C_b >= 2")
        _check_rho(rho, math.inf)
        code_bits = c_f - 1
    else:
        if c_f < 1 or c_b < 1:
            raise DomainError("packet sizes must be at least one bit")
        _check_rho(rho, 1.0)
        code_bits = c_f

    if rho == 0.0:
        e0_bal = 0.0
        rate = (1.0 - beta_f) * code_bits / c_f
    else:
        e0_bal = balanced_e0(code_bits, rho, beta_f, beta_b)
        rate = e0_bal / (rho * c_f * LN2)

    if variant in (Theorem3Variant.NO_LIST, Theorem3Variant.LIST):
        return RegionPoint(rate, e0_bal, Units.TOTAL)
    rbar = _parametric_rate(c_f, c_f, rho, beta_f)
    if variant is Theorem3Variant.MIXED_RBAR:
        return RegionPoint(rbar, e0_bal, Units.WEIGHTED, exponent_units=Units.TOTAL)
    return RegionPoint(rbar, gallager_e0(c_f, rho, beta_f), Units.WEIGHTED)


def theorem3_exponent_at(rate: float, c_f: int, c_b: int, beta_f: float, beta_b: float,
                         variant: Theorem3Variant | str = Theorem3Variant.NO_LIST) -> float:
    """Exponent of a shared-resource region at ``rate`` (in the variant's rate units)."""
    variant = Theorem3Variant(variant)
    rho_max = math.inf if variant is Theorem3Variant.LIST else 1.0

    def point(rho: float) -> RegionPoint:
        return theorem3_regions(c_f, c_b, beta_f, beta_b, rho, variant)

    if rate >= point(0.0).rate:
        return 0.0
    rho = _solve_rho(lambda r: point(r).rate, rate, rho_max)
    return point(rho).exponent


@dataclass(frozen=True)
class SplitRatios:
    """Forward/feedback shares of channel uses (eta) and of transmitted bits (xi)."""

    eta_f: float
    eta_b: float
    xi_f: float
    xi_b: float

    @classmethod
    def from_config(cls, config: SystemConfig) -> "SplitRatios":
        uses = config.k_f + config.k_b
        bits = config.k_f * config.c_f + config.k_b * config.c_b
        return cls(config.k_f / uses, config.k_b / uses,
                   config.k_f * config.c_f / bits, config.k_b * config.c_b / bits)


def _forward_factor(units: Units, ratios: SplitRatios) -> float:
    return {Units.FORWARD: 1.0, Units.TOTAL: ratios.eta_f, Units.WEIGHTED: ratios.xi_f}[units]


def convert_units(point: RegionPoint, config: SystemConfig, target: Units | str) -> RegionPoint:
    """Re-express a (rate, exponent) point in another channel-use accounting.

    Rates and exponents both scale by the forward share of the counted
    resource, so the conversion is a pair of multiplications.
    """
    target = Units(target)
    ratios = SplitRatios.from_config(config)
    to_target = _forward_factor(target, ratios)
    rate = point.rate / _forward_factor(point.units, ratios) * to_target
    exponent = point.exponent / _forward_factor(point.exponent_units, ratios) * to_target
    return RegionPoint(rate, exponent, target)


# ---------------------------------------------------------------------------
# Pascal (negative binomial) tail bound


class PascalInfeasible(DomainError):
    """No admissible concentration parameter exists for the requested slack."""


def bernoulli_divergence(a: float, b: float) -> float:
    """KL divergence ``D(a || b)`` between Bernoulli laws, in nats."""
    total = 0.0
    if a > 0:
        total += a * math.log(a / b)
    if a < 1:
        total += (1.0 - a) * math.log((1.0 - a) / (1.0 - b))
    return total


def divergence_lower_bound(eps: float, gamma: float) -> float:
    """``(1-eps) gamma - eps (ln(1/eps) + 2 (1-eps))``, a lower bound on ``D(1-eps || e^-gamma)``."""
    return (1.0 - eps) * gamma - eps * (math.log(1.0 / eps) + 2.0 * (1.0 - eps))


def _pascal_margin(eps: float, gamma: float, eps_prime: float) -> float:
    return (1.0 - eps) * gamma - eps * (2.0 * math.log(1.0 / eps) + 3.0) - (1.0 - eps_prime) * gamma


@dataclass(frozen=True)
class PascalBound:
    """Offset and exponent of the tail bound for a sum of ``2m-1`` geometrics."""

    m: int
    gamma: float
    eps_prime: float
    eps: float
    t_check: float

    @property
    def terms(self) -> int:
        return 2 * self.m - 1

    def bound(self, t):
        """Upper bound on ``P(sum > t + t_check)``."""
        out = np.exp(-self.gamma * (1.0 - self.eps_prime) * (np.asarray(t, dtype=float) + self.t_check))
        return float(out) if np.ndim(out) == 0 else out


def pascal_bound(m: int, gamma: float, eps_prime: float) -> PascalBound:
    """Find the concentration parameter and offset for the Pascal tail bound.

    The admissible ``eps`` must make the exponent margin positive and keep
    every step of the Chernoff argument valid: ``eps < 1 - e^-gamma``,
    ``ln(1-eps) >= -2 eps`` and an offset of at least ``e``.  The margin
    decreases in ``eps``, so the largest admissible value sits just below
    its root.
    """
    if m < 1:
        raise DomainError("m must be at least 1")
    if gamma <= 0:
        raise DomainError("gamma must be positive")
    if not (0.0 < eps_prime < 1.0):
        raise PascalInfeasible(
            f"eps'={eps_prime} admits no eps; the feasible range of eps' is the open interval (0, 1)")
    terms = 2 * m - 1
    cap = min(-math.expm1(-gamma), 0.79, terms / math.e)
    if _pascal_margin(cap, gamma, eps_prime) > 0:
        eps = cap * (1.0 - 1e-12)
    else:
        tiny = 1e-300
        if not _pascal_margin(tiny, gamma, eps_prime) > 0:
            raise PascalInfeasible(f"no eps found for gamma={gamma}, eps'={eps_prime}")
        root = brentq(lambda e: _pascal_margin(e, gamma, eps_prime), tiny, cap, xtol=1e-300, rtol=1e-12)
        eps = root * (1.0 - 1e-9)
    if eps <= 0 or not _pascal_margin(eps, gamma, eps_prime) > 0:
        raise PascalInfeasible(f"no eps found for gamma={gamma}, eps'={eps_prime}")
    return PascalBound(m, gamma, eps_prime, eps, terms / eps)


def pascal_tail_bound(m: int, gamma: float, eps_prime: float, t) -> tuple[float, float]:
    """Return ``(t_check, bound(t))`` so that ``P(sum of 2m-1 geometrics > t + t_check) < bound``."""
    pb = pascal_bound(m, gamma, eps_prime)
    return pb.t_check, pb.bound(t)
