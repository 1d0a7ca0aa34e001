import csv
import filecmp
import json
import os

import numpy as np
import pytest

from cptsense.cli import main
from cptsense.config import ConfigError, ScenarioConfig, config_from_dict, load_config
from cptsense.harness import (ESTIMATORS, compare_sse_steady, point_config, run_scenario,
                              simulate_run, sweep_mismatch, sweep_omega_optbias, sweep_tau_n)


@pytest.fixture
def small():
    return ScenarioConfig().with_updates(runs=4, master_seed=7,
                                         sim={"duration_s": 3e-3, "t_discard_s": 1e-3})


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh)
    return str(path)


def test_default_config_values():
    cfg = ScenarioConfig()
    assert cfg.runs == 100 and cfg.master_seed == 0
    p = cfg.cpt_params()
    assert p.eta == 0.016 and p.kappa == p.gamma / 2
    assert cfg.bath_dt == cfg.sim.update_interval_s
    assert cfg.with_updates(sim={"sse": True}).bath_dt == 1e-7


@pytest.mark.parametrize("doc", [
    {"cpt": {"rabi": 2.0}},
    {"nonsense": 1},
    {"sim": {"duration_s": 1e-3, "t_discard_s": 2e-3}},
    {"sim": {"update_interval_s": 1e-5, "bath_dt_s": 3e-6}},
    {"runs": 0},
    {"master_seed": -1},
    {"cpt": {"eta": 1.5}},
    {"bath": {"sigma_mhz": -0.1}},
    {"cpt": []},
])
def test_config_rejects_bad_documents(doc):
    with pytest.raises(ConfigError):
        config_from_dict(doc)


def test_config_round_trip(tmp_path, small):
    path = write_json(tmp_path / "c.json", small.to_dict())
    assert load_config(path) == small
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(str(bad))


def test_assumed_bath_defaults_to_truth(small):
    assert small.assumed_bath_params() == small.bath_params()
    mis = small.with_updates(assumed_bath={"sigma_mhz": 0.26})
    assert mis.assumed_bath_params().sigma == pytest.approx(2 * small.bath_params().sigma)
    assert mis.assumed_bath_params().tau_n == small.bath_params().tau_n


def test_simulate_run_shapes_and_seeding(small):
    bath, counts, truth = simulate_run(small, 2)
    n = round(small.sim.duration_s / small.sim.update_interval_s)
    assert counts.counts.shape == truth.shape == (n,)
    again = simulate_run(small, 2)
    np.testing.assert_array_equal(counts.counts, again[1].counts)
    other = simulate_run(small, 3)
    assert not np.array_equal(bath.samples, other[0].samples)


def test_run_scenario_summary(small):
    res = run_scenario(small)
    s = res.summary
    for name in ESTIMATORS:
        assert s[f"var_{name}"] > 0 and s[f"se_{name}"] > 0
        assert s[f"var_{name}_over_sigma2"] == pytest.approx(s[f"var_{name}"] / s["sigma2"])
    assert s["var_ou_over_crlb_causal"] == pytest.approx(s["var_ou"] / s["crlb_causal"])
    assert res.counts.shape == res.truth.shape == (4, 300)


def test_threads_do_not_change_results(small):
    a = run_scenario(small, threads=1).summary
    b = run_scenario(small, threads=3).summary
    assert a == b


def test_sweep_point_equals_scenario(small):
    sw = sweep_tau_n(small, [2e-3])
    ref = run_scenario(point_config(small, 0, bath={"tau_n_s": 2e-3})).summary
    assert sw.points[0]["var_ou"] == ref["var_ou"]
    assert sw.points[0]["tau_n_s"] == 2e-3


def test_sweep_points_use_independent_seeds(small):
    sw = sweep_mismatch(small, [1e-3, 1e-3], [0.13])
    assert sw.points[0]["var_ou"] != sw.points[1]["var_ou"]
    assert sw.column("tau_n_prime_s").tolist() == [1e-3, 1e-3]


def test_sweep_rejects_empty_grid(small):
    with pytest.raises(ValueError):
        sweep_tau_n(small, [])


def test_optbias_picks_minimum(small):
    sw = sweep_omega_optbias(small.with_updates(runs=2), [2.0, 3.0], [0.1, 0.3])
    assert [pt["rabi_mhz"] for pt in sw.points] == [2.0, 3.0]


def test_compare_sse_small():
    cfg = ScenarioConfig().with_updates(runs=2, sim={"duration_s": 0.3e-3,
                                                     "t_discard_s": 0.1e-3})
    rep = compare_sse_steady(cfg)
    for key in ("var_ou_sse", "var_ou_steady", "combined_se", "z_combined", "paired_se"):
        assert np.isfinite(rep[key])
    assert len(rep["variance_vs_time"]["sse"]) == 30


def run_cli(*argv):
    return main([str(a) for a in argv])


def test_cli_simulate_outputs_and_determinism(tmp_path, small):
    cfg = write_json(tmp_path / "c.json", small.with_updates(runs=2).to_dict())
    for name in ("a", "b"):
        assert run_cli("simulate", "--config", cfg, "--out", tmp_path / name) == 0
    cmp = filecmp.dircmp(tmp_path / "a", tmp_path / "b")
    assert not cmp.diff_files and not cmp.left_only
    with open(tmp_path / "a" / "runs" / "run_0001.csv") as fh:
        assert fh.readline().startswith("# cptsense")
        rows = list(csv.reader(fh))
    assert rows[0] == ["bin_index", "t_s", "x_true_rad_s", "count",
                       "est_avg", "est_simple", "est_ou"]
    assert len(rows) == 301
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["runs"] == 2 and summary["valid_from"]["avg"] == 99


def test_cli_estimate_from_simulated_run(tmp_path, small):
    cfg = write_json(tmp_path / "c.json", small.with_updates(runs=1).to_dict())
    assert run_cli("simulate", "--config", cfg, "--out", tmp_path / "sim") == 0
    src = tmp_path / "sim" / "runs" / "run_0000.csv"
    assert run_cli("estimate", "--config", cfg, "--input", src, "--out", tmp_path / "est") == 0
    sim = json.loads((tmp_path / "sim" / "summary.json").read_text())
    est = json.loads((tmp_path / "est" / "summary.json").read_text())
    assert est["var_ou"] == pytest.approx(sim["var_ou"], rel=1e-12)
    with open(tmp_path / "est" / "estimate_ou.csv") as fh:
        assert next(csv.reader(fh)) == ["bin_index", "t_s", "x_true", "y_n", "x_est"]


def test_cli_crlb(tmp_path, capsys):
    assert run_cli("crlb", "--out", tmp_path) == 0
    doc = json.loads((tmp_path / "crlb.json").read_text())
    assert doc["var_full"] == pytest.approx(172290638712.113, rel=1e-6)
    assert json.loads(capsys.readouterr().out)["causal_assumption_ok"] is True


def test_cli_sweep_and_figure(tmp_path, small):
    cfg = write_json(tmp_path / "c.json", small.with_updates(runs=2).to_dict())
    assert run_cli("sweep", "tau-n", "--tau-n", "0.001,0.002", "--config", cfg,
                   "--out", tmp_path / "sw") == 0
    with open(tmp_path / "sw" / "sweep.csv") as fh:
        fh.readline()
        rows = list(csv.DictReader(fh))
    assert [float(r["tau_n_s"]) for r in rows] == [1e-3, 2e-3]
    assert run_cli("figure", "2a", "--runs", 20, "--out", tmp_path / "f2") == 0
    with open(tmp_path / "f2" / "autocorrelation.csv") as fh:
        assert next(csv.reader(fh)) == ["lag_s", "r", "r_model"]


def test_cli_errors_are_json(tmp_path, capsys):
    bad = write_json(tmp_path / "bad.json", {"cpt": {"rabi": 1}})
    assert run_cli("crlb", "--config", bad, "--out", tmp_path) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ConfigError" and "rabi" in err["message"]
    missing = tmp_path / "counts.csv"
    missing.write_text("t_s,y\n0,1\n")
    assert run_cli("estimate", "--input", missing, "--out", tmp_path / "e") == 1
    assert json.loads(capsys.readouterr().err)["error"] == "ValueError"
    assert run_cli("crlb", "--threads", 0, "--out", tmp_path) == 1
    assert not os.path.exists(tmp_path / "crlb.json")
