import pytest
import yaml

from erasure_feedback.cli import main
from erasure_feedback.config import load_config, validate
from erasure_feedback.params import ConfigError
from erasure_feedback.protocol import SchemeKind


def _write(tmp_path, **kw):
    base = dict(scheme="nolist", rate=0.25, horizon=800, delays=[0, 8, 16], trials=2, seed=4,
                c_f=4, c_b=2, n=4, out=str(tmp_path / "out"))
    base.update(kw)
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(base))
    return path


def test_curves_writes_csv_and_png(tmp_path):
    assert main(["curves", "fig3", "--out", str(tmp_path), "--grid", "0:0.7:0.05"]) == 0
    assert (tmp_path / "fig3.csv").exists()
    assert (tmp_path / "fig3.png").read_bytes()[:4] == b"\x89PNG"


def test_curves_bytes_stable(tmp_path):
    main(["curves", "fig4", "--out", str(tmp_path / "a"), "--no-plot"])
    main(["curves", "fig4", "--out", str(tmp_path / "b"), "--no-plot"])
    assert (tmp_path / "a/fig4.csv").read_bytes() == (tmp_path / "b/fig4.csv").read_bytes()


def test_curves_bad_grid_is_usage_error(tmp_path):
    assert main(["curves", "fig3", "--grid", "0:0.9:0.1", "--out", str(tmp_path)]) == 2


def test_simulate_repeatable(tmp_path):
    cfg = _write(tmp_path)
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg)]) == 0
    first = {name: (out / name).read_bytes() for name in ("summary.csv", "trace.txt")}
    assert main(["simulate", "--config", str(cfg)]) == 0
    for name, data in first.items():
        assert (out / name).read_bytes() == data
    assert (out / "delay.png").exists()
    text = (out / "summary.csv").read_text()
    assert "# seed: 4" in text and "delay,epsilon" in text


def test_simulate_seed_override_changes_trace(tmp_path):
    cfg = _write(tmp_path)
    main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "a"), "--no-plot"])
    main(["simulate", "--config", str(cfg), "--seed", "5", "--out", str(tmp_path / "b"), "--no-plot"])
    assert (tmp_path / "a/trace.txt").read_bytes() != (tmp_path / "b/trace.txt").read_bytes()


def test_zero_trials(tmp_path):
    cfg = _write(tmp_path, trials=0)
    assert main(["simulate", "--config", str(cfg), "--no-plot"]) == 0


def test_list_with_one_bit_packets_rejected(tmp_path, capsys):
    cfg = _write(tmp_path, scheme="list", c_f=1)
    assert main(["simulate", "--config", str(cfg)]) == 2
    assert "c_f >= 2" in capsys.readouterr().err


def test_tails_writes_table(tmp_path):
    cfg = _write(tmp_path, c_f=2, rate=0.5, n=1, horizon=20_000, trials=1, beta_b=0.5)
    assert main(["tails", "--config", str(cfg), "--no-plot"]) == 0
    text = (tmp_path / "out/tails.csv").read_text()
    assert "component,fitted_slope" in text and "\nt3," in text


def test_pascal_check_exit_codes(capsys):
    assert main(["pascal-check", "3", "0.5", "0.1", "20000"]) == 0
    assert "PASS exact domination" in capsys.readouterr().out
    assert main(["pascal-check", "3", "0.5", "1.0"]) == 1
    assert main(["pascal-check", "0", "0.5", "0.1"]) == 2


def test_pascal_check_near_one_eps_prime_is_feasible():
    assert main(["pascal-check", "5", "0.5", "0.999", "20000"]) == 0


def test_config_reports_every_problem():
    with pytest.raises(ConfigError) as err:
        validate({"scheme": "arq", "c_f": 1, "beta_f": 1.5, "bogus": 1, "delays": [3, 1]})
    msg = str(err.value)
    for piece in ("bogus", "beta_f", "delays", "sequence number"):
        assert piece in msg


def test_config_type_errors():
    with pytest.raises(ConfigError):
        validate({"trials": "many"})
    with pytest.raises(ConfigError):
        validate({"write_trace": "yes"})
    with pytest.raises(ConfigError):
        validate({"rate": 0.5, "n": 20, "c_f": 4})  # 40 bits per block
    assert validate({"scheme": "ARQ", "rate": 0.5, "n": 20, "c_f": 4}).scheme is SchemeKind.ARQ


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("- just\n- a list\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    (tmp_path / "broken.yaml").write_text("a: [1,\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "broken.yaml")
