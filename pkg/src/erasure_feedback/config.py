"""Run configuration files: a flat YAML mapping validated in one pass."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

import yaml

from .params import ConfigError, SystemConfig
from .protocol import SchemeKind
from .simulator import TrialSpec

_SYSTEM_KEYS = ("k_f", "k_b", "c_f", "c_b", "beta_f", "beta_b", "n", "c", "ell", "feedback_lag")
_INT_KEYS = {"k_f", "k_b", "c_f", "c_b", "n", "c", "ell", "feedback_lag", "horizon", "trials",
             "seed", "burn_in_units"}
_FLOAT_KEYS = {"beta_f", "beta_b", "rate", "rho", "eps"}


@dataclass(frozen=True)
class RunConfig:
    """Everything a ``simulate`` or ``tails`` run needs."""

    scheme: SchemeKind = SchemeKind.NOLIST
    rate: float = 0.25
    horizon: int = 10_000
    delays: tuple[int, ...] = (0, 5, 10, 20, 40)
    trials: int = 10
    seed: int = 0
    burn_in_units: int = 2
    out: str = "out"
    write_trace: bool = True
    rho: float = 1.0
    eps: float = 0.05
    k_f: int = 1
    k_b: int = 1
    c_f: int = 4
    c_b: int = 2
    beta_f: float = 0.25
    beta_b: float = 0.25
    n: int = 1
    c: int = 1
    ell: int = 2
    feedback_lag: int = 0

    @property
    def system(self) -> SystemConfig:
        return SystemConfig(**{k: getattr(self, k) for k in _SYSTEM_KEYS}, seed=self.seed)

    def trial_spec(self) -> TrialSpec:
        return TrialSpec(self.system, self.scheme, self.rate, self.horizon, self.delays,
                         self.trials, self.seed, self.burn_in_units)

    def echo(self) -> str:
        return " ".join(f"{f.name}={_echo(getattr(self, f.name))}" for f in fields(self))


def _echo(value: Any) -> str:
    if isinstance(value, SchemeKind):
        return value.value
    if isinstance(value, tuple):
        return "[" + ";".join(str(v) for v in value) + "]"
    return str(value)


def validate(mapping: dict[str, Any]) -> RunConfig:
    """Build a :class:`RunConfig`, reporting every problem at once."""
    if not isinstance(mapping, dict):
        raise ConfigError("config must be a key-value mapping")
    known = {f.name for f in fields(RunConfig)}
    problems = [f"unknown key {key!r}" for key in mapping if key not in known]
    values: dict[str, Any] = {}
    for key, raw in mapping.items():
        if key not in known:
            continue
        try:
            values[key] = _coerce(key, raw)
        except (TypeError, ValueError) as exc:
            problems.append(f"{key}: {exc}")
    merged = {f.name: getattr(RunConfig, f.name) for f in fields(RunConfig)} | values
    problems += _range_problems(merged)
    if problems:
        raise ConfigError("invalid config:\n  " + "\n  ".join(problems))
    return RunConfig(**values)


def _coerce(key: str, raw: Any) -> Any:
    if key == "scheme":
        return SchemeKind(str(raw).lower())
    if key == "delays":
        if not isinstance(raw, (list, tuple)) or not raw:
            raise ValueError("must be a nonempty list of integers")
        return tuple(_as_int(v) for v in raw)
    if key == "write_trace":
        if not isinstance(raw, bool):
            raise ValueError("must be true or false")
        return raw
    if key == "out":
        return str(raw)
    if key in _INT_KEYS:
        return _as_int(raw)
    if key in _FLOAT_KEYS:
        if isinstance(raw, bool) or not isinstance(raw, (int, float)):
            raise ValueError(f"must be a number, got {raw!r}")
        return float(raw)
    raise ValueError("unsupported key")


def _as_int(raw: Any) -> int:
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise ValueError(f"must be an integer, got {raw!r}")
    return raw


def _range_problems(v: dict[str, Any]) -> list[str]:
    out = []
    for key in ("k_f", "k_b", "c_f", "c_b", "n", "c", "ell", "horizon"):
        if isinstance(v[key], int) and v[key] < 1:
            out.append(f"{key} must be >= 1, got {v[key]}")
    for key in ("trials", "burn_in_units"):
        if isinstance(v[key], int) and v[key] < 0:
            out.append(f"{key} must be >= 0, got {v[key]}")
    for key in ("beta_f", "beta_b"):
        if isinstance(v[key], float) and not (0.0 <= v[key] <= 1.0):
            out.append(f"{key} must lie in [0, 1], got {v[key]}")
    if isinstance(v["seed"], int) and not (0 <= v["seed"] < 2**64):
        out.append("seed must be an unsigned 64-bit integer")
    if v["feedback_lag"] not in (0, 1):
        out.append("feedback_lag must be 0 or 1")
    if isinstance(v["rate"], float) and not (0.0 < v["rate"] < 1.0):
        out.append(f"rate must lie in (0, 1), got {v['rate']}")
    if isinstance(v["rho"], float) and not (0.0 < v["rho"] <= 1.0):
        out.append("rho must lie in (0, 1]")
    if isinstance(v["eps"], float) and not (0.0 <= v["eps"] < 1.0):
        out.append("eps must lie in [0, 1)")
    delays = v["delays"]
    if isinstance(delays, tuple) and (any(d < 0 for d in delays) or list(delays) != sorted(set(delays))):
        out.append("delays must be distinct, nonnegative and increasing")
    scheme = v["scheme"]
    c_f, c_b = v["c_f"], v["c_b"]
    if scheme is SchemeKind.LIST and isinstance(c_f, int) and isinstance(c_b, int) and (c_f < 2 or c_b < 2):
        out.append("scheme 'list' needs c_f >= 2 and c_b >= 2: one bit of every packet is the "
                   "round header (list-decoding theorem precondition)")
    if scheme is SchemeKind.ARQ and isinstance(c_f, int) and c_f < 2:
        out.append("scheme 'arq' needs c_f >= 2: one bit of every packet is the sequence number")
    if isinstance(c_f, int) and c_f > 63:
        out.append("c_f must be at most 63 for simulation")
    if all(isinstance(v[k], (int, float)) for k in ("n", "c", "k_f", "rate", "c_f")):
        bits = math.floor(v["n"] * v["c"] * v["k_f"] * v["rate"] * v["c_f"] + 1e-9)
        if bits < 1:
            out.append(f"n*c*k_f*rate*c_f = {bits} bits per block; raise n*c or the rate")
        elif bits > 20 and scheme is not SchemeKind.ARQ:
            out.append(f"{bits} bits per block exceeds the 20-bit enumeration limit")
    return out


def load_config(path: str | Path, overrides: dict[str, Any] | None = None) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        mapping = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
    if not isinstance(mapping, dict):
        raise ConfigError("config must be a flat key-value mapping")
    mapping = dict(mapping)
    mapping.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return validate(mapping)
