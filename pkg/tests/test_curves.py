import math

import numpy as np
import pytest

from erasure_feedback.curves import (
    DEFAULT_PARAMS,
    CurveParams,
    Scenario,
    count_crossovers,
    parse_grid,
    read_curve_csv,
    sweep_curves,
)
from erasure_feedback.exponents import focusing_bound_exponent
from erasure_feedback.params import ConfigError, Units


def test_column_sets():
    assert sweep_curves("fig3").columns[1:] == ["focusing", "thm1", "arq", "fec_sp", "fec_r", "thm1_bb0.5"]
    assert sweep_curves("fig4").columns[1:] == ["focusing", "thm1", "thm2", "switch_envelope"]
    fig5 = sweep_curves("fig5")
    assert fig5.units is Units.TOTAL and "envelope" in fig5.columns and "eta_0.7" in fig5.columns
    fig6 = sweep_curves("fig6")
    assert fig6.curve_units["mixed"] == (Units.WEIGHTED, Units.TOTAL)


def test_fig3_ordering_and_saturation():
    t = sweep_curves("fig3", np.arange(0.0, 0.5, 0.01))
    assert np.all(t.column("thm1") <= t.column("focusing") + 1e-12)
    assert np.all(t.column("arq") <= t.column("thm1") + 1e-12)
    assert np.all(t.column("fec_r") <= t.column("fec_sp") + 1e-12)
    assert np.allclose(t.column("thm1_bb0.5")[:20], math.log(2))


def test_fig4_single_crossover():
    t = sweep_curves("fig4")
    assert count_crossovers(t.column("thm1"), t.column("thm2")) == 1
    assert np.all(t.column("switch_envelope") >= np.maximum(t.column("thm1"), t.column("thm2")) - 1e-15)


def test_fig5_envelope_dominates_family():
    t = sweep_curves("fig5")
    env = t.column("envelope")
    for name in t.columns:
        if name.startswith("eta_") or name == "thm3":
            assert np.all(env >= t.column(name) - 1e-12)


def test_rate_zero_row_is_perfect_feedback_limit():
    t = sweep_curves("fig3", np.array([0.0, 0.3]))
    assert t.column("focusing")[0] == pytest.approx(focusing_bound_exponent(0.0, 0.25))


def test_grid_parsing_and_validation():
    assert np.allclose(parse_grid("0:0.1:0.05"), [0.0, 0.05, 0.1])
    for bad in ("0:1", "a:b:c", "0.5:0.1:0.1", "0:1:0"):
        with pytest.raises(ConfigError):
            parse_grid(bad)
    with pytest.raises(ConfigError):
        sweep_curves("fig3", np.array([0.0, 0.8]))
    with pytest.raises(ConfigError):
        sweep_curves("fig4", params=CurveParams(c_f=1, c_b=2))
    with pytest.raises(ConfigError):
        CurveParams(beta_f=1.0)


def test_csv_round_trip_and_stable_bytes(tmp_path):
    a = sweep_curves("custom", np.arange(0.0, 0.7, 0.05))
    b = sweep_curves("custom", np.arange(0.0, 0.7, 0.05))
    assert a.to_csv() == b.to_csv()
    path = a.write_csv(tmp_path / "c.csv")
    cols = read_curve_csv(path)
    assert np.allclose(cols["thm3"], a.column("thm3"))
    lines = path.read_text().splitlines()
    header = next(ln for ln in lines if not ln.startswith("#"))
    assert header.startswith("rate,units,")


def test_count_crossovers():
    x = np.linspace(0, 1, 11)
    assert count_crossovers(x, 1 - x) == 1
    assert count_crossovers(x, x) == 0


def test_default_params_cover_every_scenario():
    assert set(DEFAULT_PARAMS) == set(Scenario)
