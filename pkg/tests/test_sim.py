import json

import numpy as np
import pytest

from tbq.cli import main
from tbq.correlation import CorrelationModel
from tbq.hardware import QuantBudget
from tbq.mimo import MimoScenario, generate_network, mimo_hl, mimo_mse_mmse, spatial_design
from tbq.sim import ConfigError, ExperimentConfig, monte_carlo_mse, run_sweep
from tbq.sim.config import default_grid

SMALL = MimoScenario(n_antennas=20)


# monte carlo ----------------------------------------------------------------

def test_fine_quantizer_reaches_mmse():
    net = generate_network(SMALL, 0)
    d, _ = mimo_hl(net, 0, SMALL, QuantBudget(7.5, 0.25))
    assert d.levels == 2**15
    res = monte_carlo_mse(d, net, 0, SMALL, 2000, 1)
    lin = monte_carlo_mse(None, net, 0, SMALL, 2000, 1)
    assert abs(res.mse - lin.mse) < lin.ci_half
    assert abs(res.mse - mimo_mse_mmse(net, 0, SMALL)) < 2 * res.ci_half


def test_single_trial_ci_undefined():
    net = generate_network(SMALL, 0)
    res = monte_carlo_mse(None, net, 0, SMALL, 1, 0)
    assert np.isnan(res.ci_half) and res.mse > 0


def test_thread_count_does_not_change_result():
    net = generate_network(SMALL, 1)
    d = spatial_design(net, 0, SMALL, QuantBudget(4.0, 1.0))
    a = monte_carlo_mse(d, net, 0, SMALL, 600, 9, threads=1, chunk=100)
    b = monte_carlo_mse(d, net, 0, SMALL, 600, 9, threads=4, chunk=100)
    np.testing.assert_array_equal(a.errors, b.errors)


def test_dimension_mismatch():
    net = generate_network(SMALL, 1)
    d, _ = mimo_hl(net, 0, SMALL, QuantBudget(4.0, 0.25))
    with pytest.raises(ValueError):
        monte_carlo_mse(d, net, 0, MimoScenario(n_antennas=30), 10, 0)
    with pytest.raises(ValueError):
        monte_carlo_mse(d, net, 0, SMALL, 0, 0)


def test_no_dither_runs():
    net = generate_network(SMALL, 2)
    d, mse = mimo_hl(net, 0, SMALL, QuantBudget(4.0, 0.25))
    res = monte_carlo_mse(d, net, 0, SMALL, 500, 3, dither=False)
    assert res.mse == pytest.approx(mse, rel=0.2)


# config ---------------------------------------------------------------------

def test_config_rejects_unknown_keys_with_path():
    with pytest.raises(ConfigError, match="^bogus: unknown key"):
        ExperimentConfig.from_dict({"bogus": 1})
    with pytest.raises(ConfigError, match="^scenario.n_cell: unknown key"):
        ExperimentConfig.from_dict({"scenario": {"n_cell": 3}})
    with pytest.raises(ConfigError, match="^scenario.correlation.spaceing"):
        ExperimentConfig.from_dict({"scenario": {"correlation": {"kind": "jakes", "spaceing": 1}}})


@pytest.mark.parametrize("bad,path", [
    ({"grid": []}, "grid"),
    ({"grid": [2, 1]}, "grid"),
    ({"mc_trials": 0}, "mc_trials"),
    ({"network_draws": 1.5}, "network_draws"),
    ({"seed": -1}, "seed"),
    ({"estimators": ["hl", "vq"]}, "estimators[1]"),
    ({"axis": "snr"}, "axis"),
    ({"axis": "csi_noise"}, "simulate"),
    ({"axis": "pilots", "grid": [5, 10]}, "grid"),
    ({"scenario": {"correlation": {"kind": "jakes", "spacing": 0.3}}}, "estimators"),
    ({"scenario": {"n_users": 2.5}}, "scenario.n_users"),
])
def test_config_validation(bad, path):
    with pytest.raises(ConfigError) as e:
        ExperimentConfig.from_dict(bad)
    assert e.value.path == path


def test_config_roundtrip():
    cfg = ExperimentConfig.from_dict({
        "axis": "r", "network_draws": 3, "seed": 2**63 + 5,
        "scenario": {"n_antennas": 12, "correlation": {"kind": "jakes", "spacing": 0.4}},
        "estimators": ["mmse", "hl", "shl"]})
    again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg
    assert cfg.grid == default_grid("r")


def test_default_grids():
    assert default_grid("rate")[0] == 0.5 and default_grid("rate")[-1] == 8.0
    assert len(default_grid("rate")) == 31
    assert default_grid("pilots") == tuple(range(10, 101, 10))
    assert default_grid("csi_noise")[-1] == pytest.approx(0.2)
    assert len(default_grid("r")) == 20


# sweeps ---------------------------------------------------------------------

def test_sweep_byte_identical():
    cfg = ExperimentConfig(scenario=SMALL, network_draws=3, mc_trials=30, grid=(2.0, 4.0),
                           simulate=("hl", "shl", "digital"), seed=17)
    assert run_sweep(cfg).to_csv() == run_sweep(cfg, threads=3).to_csv()
    text = run_sweep(cfg).to_csv()
    assert text.splitlines()[0] == "axis,estimator,analytic_mse,empirical_mse,ci_half,overload_rate,wall_ms"
    assert run_sweep(cfg.replace(seed=18)).to_csv() != text


@pytest.mark.parametrize("est", [
    "mmse", "opt", "ign", "hl", "shl",
    pytest.param("digital", marks=pytest.mark.xfail(
        strict=True, reason="unit support leaves the ADC step far above the channel amplitude")),
])
def test_rate_sweep_endpoint(est):
    cfg = ExperimentConfig(network_draws=50, grid=(8.0,), estimators=("mmse", est))
    res = run_sweep(cfg)
    _, m = res.column("mmse")
    _, v = res.column(est)
    assert v[0] <= 1.05 * m[0]


def test_simulated_rows_sane():
    cfg = ExperimentConfig(scenario=SMALL, network_draws=4, mc_trials=200, grid=(2.0, 3.0, 5.0),
                           simulate=("mmse", "hl", "shl", "digital"), seed=3)
    res = run_sweep(cfg)
    mmse = {r.axis: r.analytic_mse for r in res.rows if r.estimator == "mmse"}
    for r in res.rows:
        if r.empirical_mse is None or np.isnan(r.empirical_mse):
            continue
        assert r.empirical_mse >= 0
        assert r.empirical_mse >= mmse[r.axis] - 2 * r.ci_half
        assert r.overload_rate < 0.06


def test_pilot_and_ratio_axes():
    res = run_sweep(ExperimentConfig(axis="pilots", grid=(10, 40, 80), network_draws=3,
                                     estimators=("mmse", "hl", "shl")))
    x, hl = res.column("hl")
    assert x.tolist() == [10, 40, 80] and np.all(np.isfinite(hl))
    res = run_sweep(ExperimentConfig(axis="r", grid=(0.1, 0.5, 1.0), network_draws=3,
                                     estimators=("hl", "shl"), rate=4.0))
    _, s = res.column("shl")
    assert s[0] > s[1] > s[2]


def test_csi_noise_degrades():
    cfg = ExperimentConfig(scenario=SMALL, axis="csi_noise", grid=(0.0, 0.02), network_draws=2,
                           mc_trials=50, simulate=("hl",), csi_draws=2)
    res = run_sweep(cfg)
    x, emp = res.column("hl", "empirical_mse")
    assert len(res.rows) == 2 and emp[1] > emp[0]
    assert res.rows[0].analytic_mse is None


def test_correlated_sweep():
    scn = MimoScenario(n_antennas=16, correlation=CorrelationModel.jakes(0.4))
    cfg = ExperimentConfig(scenario=scn, network_draws=2, grid=(2.0,), mc_trials=100,
                           estimators=("mmse", "opt", "hl", "shl", "digital"),
                           simulate=("hl", "shl"))
    rows = {r.estimator: r for r in run_sweep(cfg).rows}
    assert rows["opt"].analytic_mse <= rows["hl"].analytic_mse <= rows["shl"].analytic_mse
    assert rows["hl"].empirical_mse == pytest.approx(rows["hl"].analytic_mse, rel=0.25)


# command line ---------------------------------------------------------------

@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"network_draws": 2, "mc_trials": 20, "grid": [2, 4],
                             "scenario": {"n_antennas": 12}, "simulate": ["hl"]}))
    return p


def test_cli_sweep_and_gnuplot(cfg_file, tmp_path):
    out = tmp_path / "o.csv"
    assert main(["sweep", "--config", str(cfg_file), "--out", str(out), "--gnuplot"]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 1 + 2 * 6
    assert (tmp_path / "o.csv.gp").read_text().startswith("set datafile separator")
    out2 = tmp_path / "o2.csv"
    main(["sweep", "--config", str(cfg_file), "--out", str(out2), "--threads", "2"])
    assert out.read_bytes() == out2.read_bytes()


def test_cli_axis_override(cfg_file, capsys):
    assert main(["sweep", "--config", str(cfg_file), "--axis", "pilots"]) == 0
    rows = capsys.readouterr().out.splitlines()[1:]
    assert rows[0].startswith("10,") and len(rows) == 10 * 6


def test_cli_other_commands(cfg_file, capsys, tmp_path):
    assert main(["bounds", "--config", str(cfg_file), "--seed", "4"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 7
    assert main(["simulate", "--config", str(cfg_file), "--no-dither"]) == 0
    out = capsys.readouterr().out
    assert "hl" in out
    p = tmp_path / "d.json"
    assert main(["design", "--config", str(cfg_file), "--system", "shl", "--out", str(p)]) == 0
    doc = json.loads(p.read_text())
    assert doc["system"] == "shl" and doc["design"]["levels"] == 2


def test_cli_reports_config_errors(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"scenario": {"n_cell": 2}}')
    assert main(["bounds", "--config", str(p)]) == 2
    assert "scenario.n_cell: unknown key" in capsys.readouterr().err
