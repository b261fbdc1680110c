"""Trial orchestration, fixed-delay error measurement and tail validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy import stats

from .exponents import (
    DomainError,
    PascalInfeasible,
    bernoulli_divergence,
    divergence_lower_bound,
    gallager_e0,
    pascal_bound,
)
from .params import ConfigError, SystemConfig
from .protocol import (
    Event,
    ProtocolViolation,
    SchemeKind,
    ServiceTimeSample,
    make_scheme,
    measure_service_components,
)


class TailFitError(ValueError):
    """Not enough tail mass to fit a slope."""


@dataclass(frozen=True)
class TrialSpec:
    """What to simulate.  Delays ``d`` are in cycles: bit ``i`` is due
    ``d * k_f`` forward uses after its arrival."""

    config: SystemConfig
    scheme: SchemeKind = SchemeKind.NOLIST
    rate: float = 0.25
    horizon: int = 10_000
    delays: tuple[int, ...] = (0, 5, 10, 20, 40)
    trials: int = 10
    seed: int = 0
    burn_in_units: int = 2
    record_events: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "scheme", SchemeKind(self.scheme))
        object.__setattr__(self, "delays", tuple(int(d) for d in self.delays))
        if self.horizon < 1:
            raise ConfigError("horizon must be at least one cycle")
        if self.trials < 0:
            raise ConfigError("trial count must be nonnegative")
        if any(d < 0 for d in self.delays) or list(self.delays) != sorted(set(self.delays)):
            raise ConfigError("delays must be distinct, nonnegative and increasing")
        if self.burn_in_units < 0:
            raise ConfigError("burn_in_units must be nonnegative")


@dataclass
class TrialTrace:
    """Everything the analysis needs from one trial."""

    trial: int
    cycles: int
    unit_bits: int
    block_bits: int
    commit_use: np.ndarray
    events: list[Event] = field(default_factory=list)
    forward_erasures: int = 0
    feedback_erasures: int = 0


@dataclass
class TraceCollection:
    spec: TrialSpec
    traces: list[TrialTrace]

    def __len__(self) -> int:
        return len(self.traces)

    def service_samples(self) -> list[ServiceTimeSample]:
        k_f = self.spec.config.k_f
        out = []
        for tr in self.traces:
            out.extend(measure_service_components(tr.events, self.spec.scheme, k_f))
        return out


def run_trial(spec: TrialSpec, trial: int) -> TrialTrace:
    scheme = make_scheme(spec.scheme, spec.config, spec.rate, trial=trial, seed=spec.seed,
                         record_events=spec.record_events)
    try:
        scheme.run(spec.horizon)
    except ProtocolViolation as exc:
        exc.trial = trial
        raise
    return TrialTrace(trial, spec.horizon, scheme.unit_bits, scheme.block_bits,
                      np.asarray(scheme.commit_use, dtype=np.int64), scheme.events,
                      scheme.forward.erasures, scheme.feedback.erasures)


def run_trials(spec: TrialSpec) -> TraceCollection:
    """Run ``spec.trials`` independent trials; trial ``k`` is seeded by ``(seed, k)``."""
    return TraceCollection(spec, [run_trial(spec, k) for k in range(spec.trials)])


# ---------------------------------------------------------------------------
# fixed-delay error


@dataclass(frozen=True)
class DelayErrorRow:
    delay: int
    epsilon: float
    stderr: float
    observations: int
    worst_offset: int
    excluded: int


@dataclass(frozen=True)
class DelayErrorCurve:
    rows: tuple[DelayErrorRow, ...]
    trials: int

    @property
    def delays(self) -> np.ndarray:
        return np.array([r.delay for r in self.rows])

    @property
    def epsilons(self) -> np.ndarray:
        return np.array([r.epsilon for r in self.rows])

    def monotone_violations(self, slack: float = 1.0) -> list[int]:
        """Delays where epsilon rises by more than ``slack`` standard errors."""
        bad = []
        for a, b in zip(self.rows, self.rows[1:]):
            if b.epsilon > a.epsilon + slack * math.hypot(a.stderr, b.stderr):
                bad.append(b.delay)
        return bad


def bit_error_vs_delay(traces: TraceCollection, spec: TrialSpec | None = None,
                       min_observations: int = 100) -> DelayErrorCurve:
    """Empirical delay-``d`` bit error probability.

    A bit is correct at delay ``d`` iff its unit was committed no later than
    ``arrival + d*k_f``; uncommitted bits count as errors.  Bits whose
    deadline falls past the horizon are excluded.  Observations are pooled
    over units (after ``burn_in_units``) and trials by the bit's offset
    within its unit; epsilon is the maximum over offsets with at least
    ``min_observations`` observations.
    """
    spec = spec or traces.spec
    cfg = spec.config
    k_f = cfg.k_f
    span = cfg.n * cfg.c * k_f
    nd = len(spec.delays)
    delays = np.asarray(spec.delays, dtype=np.int64)
    if not traces.traces:
        return DelayErrorCurve(tuple(DelayErrorRow(int(d), math.nan, math.nan, 0, -1, 0)
                                     for d in delays), 0)
    width = traces.traces[0].unit_bits
    errors = np.zeros((nd, width), dtype=np.int64)
    counts = np.zeros((nd, width), dtype=np.int64)
    excluded = np.zeros(nd, dtype=np.int64)
    for tr in traces.traces:
        horizon_use = tr.cycles * k_f
        units = np.arange(1, horizon_use * tr.block_bits // (span * tr.unit_bits) + 2, dtype=np.int64)
        units = units[units > spec.burn_in_units]
        if units.size == 0:
            continue
        bit_index = (units[:, None] - 1) * tr.unit_bits + np.arange(1, tr.unit_bits + 1)
        arrival = -(-bit_index * span // tr.block_bits)
        commit = np.full(units.shape, np.iinfo(np.int64).max, dtype=np.int64)
        done = units <= tr.commit_use.size
        commit[done] = tr.commit_use[units[done] - 1]
        for k, d in enumerate(delays):
            deadline = arrival + d * k_f
            valid = deadline <= horizon_use
            wrong = valid & (commit[:, None] > deadline)
            counts[k] += valid.sum(axis=0)
            errors[k] += wrong.sum(axis=0)
            excluded[k] += (~valid).sum()
    rows = []
    for k, d in enumerate(delays):
        ok = counts[k] >= min_observations
        if not ok.any():
            rows.append(DelayErrorRow(int(d), math.nan, math.nan, int(counts[k].sum()), -1,
                                      int(excluded[k])))
            continue
        freq = np.where(ok, errors[k] / np.maximum(counts[k], 1), -1.0)
        worst = int(np.argmax(freq))
        p, n = float(freq[worst]), int(counts[k, worst])
        rows.append(DelayErrorRow(int(d), p, math.sqrt(p * (1 - p) / n), n, worst, int(excluded[k])))
    return DelayErrorCurve(tuple(rows), len(traces))


def delay_slope(curve: DelayErrorCurve, k_f: int, lo: float = 1e-4, hi: float = 1e-1) -> TailEstimate:
    """Weighted least-squares slope of ``-ln epsilon`` against ``d*k_f`` over ``lo <= epsilon <= hi``.

    Weights are ``epsilon / stderr``, the inverse delta-method standard
    deviation of ``ln epsilon``.
    """
    d = curve.delays * k_f
    eps = curve.epsilons
    err = np.array([r.stderr for r in curve.rows])
    keep = (eps >= lo) & (eps <= hi) & (err > 0)
    if keep.sum() < 2:
        raise TailFitError(f"only {int(keep.sum())} delays have epsilon in [{lo}, {hi}]")
    x, y, w = d[keep], np.log(eps[keep]), eps[keep] / err[keep]
    if x.size > 2:
        coef, cov = np.polyfit(x, y, 1, w=w, cov="unscaled")
        stderr = float(math.sqrt(max(cov[0, 0], 0.0)))
    else:
        coef, stderr = np.polyfit(x, y, 1, w=w), math.nan
    return TailEstimate(float(-coef[0]), float(coef[1]), int(x.min()), int(x.max()),
                        int(x.size), stderr)


# ---------------------------------------------------------------------------
# tail fitting


@dataclass(frozen=True)
class TailEstimate:
    """Exponential tail fit ``P(X > t) ~ exp(intercept - slope t)`` over ``[t_lo, t_hi]``."""

    slope: float
    intercept: float
    t_lo: int
    t_hi: int
    samples: int
    stderr: float


def empirical_ccdf(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Support points ``t``, ``P(X > t)`` and the hit counts ``#{X > t}``."""
    x = np.sort(np.asarray(samples))
    support = np.unique(x)
    hits = x.size - np.searchsorted(x, support, side="right")
    return support, hits / x.size, hits


def fit_tail(samples: Iterable[int] | np.ndarray, min_samples: int = 10_000, skip: int = 3,
             min_hits: int = 10) -> TailEstimate:
    """Weighted least-squares fit of the log empirical CCDF.

    The first ``skip`` support points are dropped (constant offsets distort
    small ``t``), as is every point with fewer than ``min_hits`` samples
    beyond it.  Weights are inverse delta-method standard deviations of
    ``log CCDF``.
    """
    x = np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples)
    if x.size < min_samples:
        raise TailFitError(f"{x.size} samples, need at least {min_samples}")
    support, ccdf, hits = empirical_ccdf(x)
    t, p, h = support[skip:], ccdf[skip:], hits[skip:]
    keep = h >= min_hits
    t, p, h = t[keep], p[keep], h[keep]
    if t.size < 2:
        lo, hi = (int(support[0]), int(support[-1])) if support.size else (0, 0)
        raise TailFitError(f"no tail to fit: {t.size} usable points; support spans [{lo}, {hi}]")
    weights = np.sqrt(h / np.maximum(1.0 - p, 1e-12))
    if t.size > 2:
        coef, cov = np.polyfit(t, np.log(p), 1, w=weights, cov="unscaled")
        stderr = float(math.sqrt(max(cov[0, 0], 0.0)))
    else:
        coef, stderr = np.polyfit(t, np.log(p), 1, w=weights), math.nan
    return TailEstimate(float(-coef[0]), float(coef[1]), int(t[0]), int(t[-1]), int(x.size), stderr)


# ---------------------------------------------------------------------------
# service-time bound


@dataclass(frozen=True)
class ServiceBoundReport:
    gamma: float
    eps: float
    offset: int
    k: int | None
    passes: bool
    tail: TailEstimate | None
    checked_points: int


def validate_service_bound(samples: Iterable[int] | np.ndarray, config: SystemConfig, rho: float,
                           rate: float, eps: float = 0.05, min_hits: int = 10,
                           min_points: int = 10) -> ServiceBoundReport:
    """Smallest ``K`` such that ``P(T - offset - K > s) <= exp(-s (gamma - eps))`` on the measured range.

    ``gamma = min(E_0(C_f, rho), -(k_b/k_f) ln beta_b)`` and
    ``offset = ceil(t~) c k_f`` with ``t~ = n R / C~(rho)``,
    ``C~(rho) = E_0(C_f, rho) / (rho C_f ln 2)``.  The measured range is
    where at least ``min_hits`` samples exceed the threshold.  The check
    passes when such a ``K`` leaves at least ``min_points`` measured
    thresholds to compare; pushing ``K`` into the sparse far tail would
    otherwise make any sample pass.
    """
    t = np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples, dtype=np.int64)
    e0 = float(gallager_e0(config.c_f, rho, config.beta_f))
    gamma = min(e0, config.feedback_exponent)
    if e0 > 0:
        c_tilde = e0 / (rho * config.c_f * math.log(2))
        offset = math.ceil(config.n * rate / c_tilde) * config.c * config.k_f
    else:
        offset = 0
    try:
        tail = fit_tail(t, min_samples=min(10_000, t.size)) if t.size else None
    except TailFitError:
        tail = None
    if t.size == 0:
        return ServiceBoundReport(gamma, eps, offset, None, False, tail, 0)
    x = np.sort(t)
    n = x.size
    decay = max(gamma - eps, 0.0)
    top = int(x[-1])
    thresholds = np.arange(0, top + 1)
    ccdf = (n - np.searchsorted(x, thresholds, side="right")) / n
    measured = (n - np.searchsorted(x, thresholds, side="right")) >= min_hits
    for k in range(0, max(top - offset, 0) + 1):
        base = offset + k
        if base > top:
            break
        s, m = thresholds[base:] - base, measured[base:]
        if m.sum() < min_points:
            break
        ok = ccdf[base:][m] <= np.exp(-decay * s[m]) + 1e-15
        if ok.all():
            return ServiceBoundReport(gamma, eps, offset, k, True, tail, int(m.sum()))
    return ServiceBoundReport(gamma, eps, offset, None, False, tail, 0)


# ---------------------------------------------------------------------------
# Pascal tail bound


@dataclass(frozen=True)
class PascalReport:
    m: int
    gamma: float
    eps_prime: float
    feasible: bool
    eps: float = math.nan
    t_check: float = math.nan
    points: tuple[tuple[float, float, float, float], ...] = ()  # (t, empirical, exact, log bound)
    dominated: bool = False
    exact_dominated: bool = False
    bernoulli_identity: bool = False
    divergence_ok: bool = False
    sampler_ok: bool = False
    message: str = ""

    @property
    def passes(self) -> bool:
        return (self.feasible and self.dominated and self.exact_dominated
                and self.bernoulli_identity and self.divergence_ok and self.sampler_ok)


def divergence_grid_check(gamma: float, points: int = 1000, eps_max: float = 0.79) -> bool:
    """``D(1-eps || e^-gamma) >= (1-eps) gamma - eps (ln(1/eps) + 2(1-eps))`` on an eps grid."""
    grid = np.linspace(eps_max / points, eps_max, points)
    q = math.exp(-gamma)
    return all(bernoulli_divergence(1.0 - e, q) >= divergence_lower_bound(e, gamma) - 1e-12
               for e in grid)


def pascal_empirical_check(m: int, gamma: float, eps_prime: float, samples: int = 1_000_000,
                           seed: int = 0, t_grid: np.ndarray | None = None,
                           chunk: int = 100_000) -> PascalReport:
    """Monte-Carlo and exact checks of the Pascal tail bound.

    Draws ``samples`` sums of ``2m-1`` iid geometrics with
    ``P(T' > t) = exp(-gamma t)`` and checks the empirical CCDF at
    ``t + t_check`` against the bound for every ``t`` in ``t_grid``.  The
    same comparison is made with the exact negative-binomial tail, which is
    also checked against the equivalent Bernoulli-count form
    ``P(Binomial(floor(x), p) < 2m-1)``.  Finally the divergence lower bound
    used in the Chernoff step is verified on an eps grid.
    """
    try:
        pb = pascal_bound(m, gamma, eps_prime)
    except PascalInfeasible as exc:
        return PascalReport(m, gamma, eps_prime, False, message=str(exc))
    except DomainError as exc:
        return PascalReport(m, gamma, eps_prime, False, message=str(exc))
    terms = pb.terms
    p = -math.expm1(-gamma)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(m, terms)))
    sums = []
    left = samples
    while left > 0:
        size = min(chunk, left)
        sums.append(rng.geometric(p, size=(size, terms)).sum(axis=1))
        left -= size
    x = np.sort(np.concatenate(sums)) if sums else np.array([], dtype=np.int64)
    if t_grid is None:
        t_grid = np.arange(0.0, 101.0, 5.0)
    points = []
    dominated = exact_dominated = identity = True
    rate = gamma * (1.0 - eps_prime)
    for t in t_grid:
        threshold = t + pb.t_check
        floor_x = math.floor(threshold)
        emp = float((x.size - np.searchsorted(x, threshold, side="right")) / max(x.size, 1))
        log_exact = float(stats.nbinom.logsf(floor_x - terms, terms, p))
        log_bernoulli = float(stats.binom.logcdf(terms - 1, floor_x, p))
        log_bound = float(-rate * threshold)
        points.append((float(t), emp, math.exp(log_exact), log_bound))
        # compare in logs: both sides underflow for the large offsets the bound needs
        dominated &= emp == 0.0 or math.log(emp) < log_bound
        exact_dominated &= log_exact < log_bound
        identity &= math.isclose(log_exact, log_bernoulli, rel_tol=1e-9, abs_tol=1e-9)
    # the offset pushes every comparison far into the tail, so also confirm the
    # sampler against the exact law where the empirical CCDF is informative
    sampler_ok = True
    for v in range(terms, int(x[-1]) + 1 if x.size else terms):
        exact = float(stats.nbinom.sf(v - terms, terms, p))
        emp = float((x.size - np.searchsorted(x, v, side="right")) / x.size)
        sampler_ok &= abs(emp - exact) <= 5.0 * math.sqrt(exact * (1 - exact) / x.size) + 1.0 / x.size
    return PascalReport(m, gamma, eps_prime, True, pb.eps, pb.t_check, tuple(points),
                        bool(dominated), bool(exact_dominated), bool(identity),
                        divergence_grid_check(gamma), bool(sampler_ok))


# ---------------------------------------------------------------------------
# trace serialization

TRACE_FIELDS = ("trial", "cycle", "phase", "kind", "block", "use")


def write_trace(traces: TraceCollection, path) -> None:
    """Newline-delimited records, one event per line, fields in ``TRACE_FIELDS`` order."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("# " + ",".join(TRACE_FIELDS) + "\n")
        for tr in sorted(traces.traces, key=lambda tr: tr.trial):
            for ev in tr.events:
                fh.write(f"{tr.trial},{ev.cycle},{ev.phase},{ev.kind},{ev.block},{ev.use}\n")


def read_trace(path) -> dict[int, list[Event]]:
    out: dict[int, list[Event]] = {}
    with open(path, encoding="ascii") as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            trial, cycle, phase, kind, block, use = line.rstrip("\n").split(",")
            out.setdefault(int(trial), []).append(Event(int(cycle), phase, kind, int(block), int(use)))
    return out
