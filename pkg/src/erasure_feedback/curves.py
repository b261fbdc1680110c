"""Rate/exponent curve tables for the standard comparison figures."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import __version__
from .exponents import (
    Theorem3Variant,
    arq_exponent_at,
    focusing_bound_exponent,
    random_coding_exponent,
    sphere_packing_exponent,
    theorem1_exponent_at,
    theorem2_exponent_at,
    theorem3_exponent_at,
)
from .params import ConfigError, ErasureParams, Units


class Scenario(str, Enum):
    FIG3 = "fig3"
    FIG4 = "fig4"
    FIG5 = "fig5"
    FIG6 = "fig6"
    CUSTOM = "custom"


@dataclass(frozen=True)
class CurveParams:
    """Channel parameters for a curve sweep.  ``c_f`` may be ``inf``."""

    beta_f: float = 0.25
    beta_b: float = 0.25
    c_f: float = math.inf
    c_b: float = 2
    etas: tuple[float, ...] = (0.5, 0.6, 0.7, 0.8, 0.9)
    saturation_beta_b: float = 0.5

    def __post_init__(self) -> None:
        ErasureParams(self.beta_f, self.c_f)
        ErasureParams(self.beta_b, self.c_b)
        if not (0.0 < self.beta_f < 1.0 and 0.0 < self.beta_b < 1.0):
            raise ConfigError("curve sweeps need erasure probabilities strictly inside (0, 1)")
        if any(not (0.0 < e < 1.0) for e in self.etas):
            raise ConfigError("every eta_f must lie strictly inside (0, 1)")


DEFAULT_PARAMS = {
    Scenario.FIG3: CurveParams(c_f=math.inf, c_b=2),
    Scenario.FIG4: CurveParams(c_f=4, c_b=2),
    Scenario.FIG5: CurveParams(c_f=8, c_b=8),
    Scenario.FIG6: CurveParams(c_f=8, c_b=8),
    Scenario.CUSTOM: CurveParams(c_f=8, c_b=8),
}


def default_grid(params: CurveParams, step: float = 0.005) -> np.ndarray:
    """Rates from 0 up to (not including) forward capacity."""
    return np.arange(0.0, 1.0 - params.beta_f - 1e-12, step)


def parse_grid(text: str) -> np.ndarray:
    """``LO:HI:STEP`` with ``HI`` included when it lies on the lattice."""
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise ConfigError(f"grid must look like LO:HI:STEP, got {text!r}") from None
    if not (step > 0 and hi >= lo >= 0):
        raise ConfigError(f"grid needs 0 <= LO <= HI and STEP > 0, got {text!r}")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


@dataclass
class CurveTable:
    """Rows of ``(rate, units, curve...)``.

    ``units`` is the rate/exponent convention of the table's primary
    curves; ``curve_units`` records each curve's own (rate, exponent)
    units, since the mixed-units figure plots curves counted differently.
    """

    scenario: Scenario
    columns: list[str]
    units: Units
    curve_units: dict[str, tuple[Units, Units]]
    rows: list[list[float]]
    params: CurveParams
    metadata: dict[str, str] = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([row[self.columns.index(name)] for row in self.rows])

    @property
    def rate(self) -> np.ndarray:
        return np.array([row[0] for row in self.rows])

    def to_csv(self) -> str:
        lines = [f"# erasure-feedback {__version__}", f"# scenario: {self.scenario.value}"]
        lines.append("# params: " + " ".join(f"{k}={v}" for k, v in asdict(self.params).items()))
        lines.append("# curve_units: " + " ".join(
            f"{name}={r.value}/{e.value}" for name, (r, e) in self.curve_units.items()))
        for key, value in self.metadata.items():
            lines.append(f"# {key}: {value}")
        lines.append(",".join(["rate", "units"] + self.columns[1:]))
        for row in self.rows:
            cells = [_fmt(row[0]), self.units.value] + [_fmt(v) for v in row[1:]]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(self.to_csv(), encoding="ascii")
        return path


def _fmt(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.10g}"


def read_curve_csv(path: str | Path) -> dict[str, np.ndarray]:
    """Numeric columns of a curve CSV (the units column is dropped)."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln and not ln.startswith("#")]
    header = lines[0].split(",")
    body = [ln.split(",") for ln in lines[1:]]
    return {name: np.array([float(r[k]) for r in body])
            for k, name in enumerate(header) if name != "units"}


# ---------------------------------------------------------------------------
# per-curve exponent-at-rate functions


def _fec(kind: str, rate: float, p: CurveParams) -> float:
    params = ErasureParams(p.beta_f, p.c_f)
    fn = sphere_packing_exponent if kind == "sp" else random_coding_exponent
    return fn(rate, params)


def _split_curve(rate: float, p: CurveParams, eta: float) -> float:
    """No-list scheme on a shared channel with forward share ``eta`` (total units)."""
    return eta * theorem1_exponent_at(rate / eta, p.beta_f, p.beta_b, p.c_f, k_f=eta, k_b=1.0 - eta)


def _arq_split(rate: float, p: CurveParams, eta: float) -> float:
    if p.c_f < 2:
        return math.nan
    return eta * arq_exponent_at(rate / eta, p.c_f, p.beta_f, p.beta_b)


def _curve_specs(scenario: Scenario, p: CurveParams):
    """Ordered ``(name, rate_units, exponent_units, fn(rate))`` for a scenario."""
    F, T, W = Units.FORWARD, Units.TOTAL, Units.WEIGHTED
    focusing = ("focusing", F, F, lambda r: focusing_bound_exponent(r, p.beta_f))
    thm1 = ("thm1", F, F, lambda r: theorem1_exponent_at(r, p.beta_f, p.beta_b, p.c_f))
    arq = ("arq", F, F, lambda r: arq_exponent_at(r, p.c_f, p.beta_f, p.beta_b))
    fec_sp = ("fec_sp", F, F, lambda r: _fec("sp", r, p))
    fec_r = ("fec_r", F, F, lambda r: _fec("r", r, p))
    thm3 = ("thm3", T, T, lambda r: theorem3_exponent_at(r, p.c_f, p.c_b, p.beta_f, p.beta_b))
    etas = [(f"eta_{eta:g}", T, T, lambda r, eta=eta: _split_curve(r, p, eta)) for eta in p.etas]

    if scenario is Scenario.FIG3:
        sat = f"thm1_bb{p.saturation_beta_b:g}"
        return [focusing, thm1, arq, fec_sp, fec_r,
                (sat, F, F, lambda r: theorem1_exponent_at(r, p.beta_f, p.saturation_beta_b, p.c_f))]
    if scenario is Scenario.FIG4:
        thm2 = ("thm2", F, F, lambda r: theorem2_exponent_at(r, p.beta_f, p.beta_b, int(p.c_f)))
        return [focusing, thm1, thm2, ("switch_envelope", F, F, None)]
    if scenario is Scenario.FIG5:
        return ([focusing, ("arq_half", T, T, lambda r: _arq_split(r, p, 0.5)), fec_sp]
                + etas + [thm3, ("envelope", T, T, None)])
    if scenario is Scenario.FIG6:
        mixed = ("mixed", W, T, lambda r: theorem3_exponent_at(
            r, p.c_f, p.c_b, p.beta_f, p.beta_b, Theorem3Variant.MIXED_RBAR))
        return [focusing, mixed, thm3, fec_sp]
    specs = [focusing, thm1]
    if p.c_f >= 2 and p.c_b >= 2 and not math.isinf(p.c_f):
        specs.append(("thm2", F, F, lambda r: theorem2_exponent_at(r, p.beta_f, p.beta_b, int(p.c_f))))
    specs += [arq, fec_sp, fec_r] + etas + [thm3, ("envelope", T, T, None)]
    return specs


def sweep_curves(scenario: Scenario | str, grid: np.ndarray | None = None,
                 params: CurveParams | None = None) -> CurveTable:
    """Evaluate every curve of ``scenario`` at each rate of ``grid``.

    Each curve is the exponent reachable at that rate in its own units
    (0 beyond the curve's rate range).  Envelope columns are pointwise
    maxima: ``switch_envelope`` over the two free-feedback theorems,
    ``envelope`` over the fixed-split family together with the balanced
    region.
    """
    scenario = Scenario(scenario)
    params = params or DEFAULT_PARAMS[scenario]
    if scenario is Scenario.FIG4 and (math.isinf(params.c_f) or params.c_f < 2 or params.c_b < 2):
        raise ConfigError("the list-decoding comparison needs finite C_f >= 2 and C_b >= 2")
    grid = default_grid(params) if grid is None else np.asarray(grid, dtype=float)
    capacity = 1.0 - params.beta_f
    if grid.size == 0 or grid.min() < 0 or grid.max() >= capacity:
        raise ConfigError(f"rate grid must be nonempty and lie in [0, {capacity})")
    specs = _curve_specs(scenario, params)
    names = [s[0] for s in specs]
    values: dict[str, np.ndarray] = {}
    for name, _, _, fn in specs:
        if fn is not None:
            values[name] = np.array([fn(float(r)) for r in grid])
    if "switch_envelope" in names:
        values["switch_envelope"] = np.maximum(values["thm1"], values["thm2"])
    if "envelope" in names:
        family = [values[n] for n in names if n.startswith("eta_")] + [values["thm3"]]
        values["envelope"] = np.max(family, axis=0)
    rows = [[float(r)] + [float(values[n][k]) for n in names] for k, r in enumerate(grid)]
    primary = Units.TOTAL if scenario in (Scenario.FIG5, Scenario.FIG6) else Units.FORWARD
    curve_units = {name: (ru, eu) for name, ru, eu, _ in specs}
    return CurveTable(scenario, ["rate"] + names, primary, curve_units, rows, params)


def count_crossovers(a: np.ndarray, b: np.ndarray, tol: float = 1e-12) -> int:
    """Number of sign changes of ``a - b``, ignoring near-ties."""
    diff = a - b
    signs = np.sign(np.where(np.abs(diff) <= tol, 0.0, diff))
    signs = signs[signs != 0]
    return int(np.count_nonzero(signs[1:] != signs[:-1]))
