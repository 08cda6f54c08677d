import json
import math

import numpy as np
import pytest
import yaml

from affinecausal.families import ModelFamily, ModelSpec, ParamVector, simulate
from affinecausal.harness import (
    ExperimentConfig,
    McReport,
    emit_report,
    load_model_file,
    load_report,
    load_returns,
    run_pipeline,
    run_selection_experiment,
    run_size_power_experiment,
)
from affinecausal.diagnostics import portmanteau
from affinecausal.estimation import OptimizerOptions, fit_qmle
from affinecausal.selection import Penalty


AR1_DOC = {
    "truth": {"model": {"family": {"kind": "ar", "p": 1}}, "params": [1.0, 0.5]},
    "candidates": {
        "kind": "list",
        "models": [{"family": {"kind": "white_noise"}}, {"family": {"kind": "ar", "p": 1}}],
    },
    "penalties": ["log_n", "sqrt_n"],
    "sample_sizes": [300],
    "replications": 10,
    "restarts": 1,
}


# ---------------------------------------------------------------------------
# data ingestion

def test_load_returns_log_price_ratios(tmp_path):
    f = tmp_path / "p.txt"
    f.write_text(f"1.0\n{math.e}\n{math.e**2}\n")
    ts = load_returns(f, scheme="prices")
    np.testing.assert_allclose(ts.values, [1.0, 1.0], rtol=1e-12)


def test_load_returns_scale_and_passthrough(tmp_path):
    f = tmp_path / "r.txt"
    f.write_text("0.5\n-0.25\n")
    ts = load_returns(f, scheme="returns", scale=100.0)
    np.testing.assert_allclose(ts.values, [50.0, -25.0])


def test_load_returns_two_column_with_header(tmp_path):
    f = tmp_path / "p.csv"
    f.write_text("date,close\n2020-01-01,100.0\n2020-01-02,110.0\n2020-01-03,99.0\n")
    ts = load_returns(f, scheme="prices")
    assert ts.values.size == 2
    np.testing.assert_allclose(ts.values[0], math.log(1.1), rtol=1e-12)


def test_load_returns_bad_rows_cite_line_numbers(tmp_path):
    f = tmp_path / "p.txt"
    f.write_text("1.0\n2.0\noops\n3.0\nalso-bad\n")
    with pytest.raises(ValueError) as err:
        load_returns(f, scheme="prices")
    assert "3" in str(err.value) and "5" in str(err.value)


def test_load_returns_guards(tmp_path):
    f = tmp_path / "p.txt"
    f.write_text("1.0\n0.0\n2.0\n")
    with pytest.raises(ValueError):
        load_returns(f, scheme="prices")
    f.write_text("1.0\n")
    with pytest.raises(ValueError):
        load_returns(f, scheme="prices")
    with pytest.raises(ValueError):
        load_returns(f, scheme="nope")


# ---------------------------------------------------------------------------
# configuration

def test_config_from_yaml(tmp_path):
    f = tmp_path / "exp.yaml"
    f.write_text(yaml.safe_dump(AR1_DOC))
    cfg = ExperimentConfig.from_yaml(f)
    assert cfg.truth.label() == "AR(1)"
    assert [p.label() for p in cfg.penalties] == ["log_n", "sqrt_n"]
    assert cfg.reference == cfg.truth
    assert cfg.test_penalty.label() == "sqrt_n"


def test_config_invariants():
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({**AR1_DOC, "replications": 0})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({**AR1_DOC, "sample_sizes": [10]})
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({**AR1_DOC, "power_fit": "maybe"})
    bad_truth = {"model": {"family": {"kind": "ar", "p": 1}}, "params": [1.0, 1.5]}
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({**AR1_DOC, "truth": bad_truth})


def test_model_file_round_trip(tmp_path):
    f = tmp_path / "m.yaml"
    f.write_text("model:\n  family: {kind: garch, p: 1, q: 1}\nparams: [0.1, 0.1, 0.8]\n")
    spec, params = load_model_file(f)
    assert spec.label() == "GARCH(1,1)"
    np.testing.assert_array_equal(params.values, [0.1, 0.1, 0.8])


# ---------------------------------------------------------------------------
# experiments

def test_selection_experiment_rates():
    cfg = ExperimentConfig.from_dict(AR1_DOC)
    rep = run_selection_experiment(cfg)
    assert rep.kind == "selection"
    assert len(rep.rows) == 2  # one row per penalty
    for row in rep.rows:
        assert row["completed"] == 10
        assert row["wrong"] + row["true"] + row["overfitted"] == pytest.approx(100.0)
        assert row["true"] >= 80.0  # phi=0.5 at n=300 is easy


def test_single_replication_rates_are_binary():
    cfg = ExperimentConfig.from_dict({**AR1_DOC, "replications": 1})
    rep = run_selection_experiment(cfg)
    for row in rep.rows:
        assert {row["wrong"], row["true"], row["overfitted"]} <= {0.0, 100.0}


def test_replication_seeds_are_disjoint():
    spec = ModelSpec(ModelFamily.ar(1))
    theta = ParamVector(spec.family, [1.0, 0.5])
    a = simulate(spec, theta, 2000, seed=100).values
    b = simulate(spec, theta, 2000, seed=101).values
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.1


def test_selection_experiment_is_byte_reproducible():
    cfg = ExperimentConfig.from_dict(AR1_DOC)
    r1 = run_selection_experiment(cfg)
    r2 = run_selection_experiment(cfg)
    assert json.dumps(r1.to_dict()) == json.dumps(r2.to_dict())


def test_size_power_experiment():
    doc = {
        **AR1_DOC,
        "truth": {"model": {"family": {"kind": "arch", "p": 1}}, "params": [0.3, 0.4]},
        "candidates": {
            "kind": "list",
            "models": [{"family": {"kind": "arch", "p": 1}}, {"family": {"kind": "arch", "p": 2}}],
        },
        "alternative": {
            "model": {"family": {"kind": "ar", "p": 1}},
            "params": [1.0, 0.6],
        },
        "replications": 10,
        "sample_sizes": [400],
        "K": [3],
    }
    rep = run_size_power_experiment(ExperimentConfig.from_dict(doc))
    assert rep.kind == "size_power"
    row = rep.rows[0]
    assert row["K"] == 3 and 0.0 <= row["size"] <= 100.0
    assert row["power"] is not None


def test_power_collapses_to_size_when_alternative_is_truth():
    doc = {
        **AR1_DOC,
        "alternative": AR1_DOC["truth"],
        "replications": 30,
        "sample_sizes": [300],
    }
    rep = run_size_power_experiment(ExperimentConfig.from_dict(doc))
    row = rep.rows[0]
    # same data-generating process on both branches: rates agree statistically
    assert abs(row["size"] - row["power"]) <= 25.0


# ---------------------------------------------------------------------------
# pipeline and reports

def test_pipeline_single_model_equals_fit_plus_test():
    spec = ModelSpec(ModelFamily.garch(1, 1))
    theta = ParamVector(spec.family, [0.1, 0.1, 0.8])
    x = simulate(spec, theta, 800, seed=41)
    opts = OptimizerOptions(restarts=1, compute_covariance=False)
    rep = run_pipeline(x, [spec], [Penalty.sqrt_n()], K=3, opts=opts)
    assert rep.tests[0]["model"] == "GARCH(1,1)"
    direct = fit_qmle(spec, x, OptimizerOptions(restarts=1))
    pm = portmanteau(spec, direct, x.values, 3)
    assert rep.tests[0]["portmanteau"]["Q"] == pytest.approx(pm.Q, rel=1e-8)
    assert rep.selections[0].chosen_record.fit.loglik == pytest.approx(direct.loglik, rel=1e-8)


def test_emit_report_round_trip(tmp_path):
    cfg = ExperimentConfig.from_dict(AR1_DOC)
    rep = run_selection_experiment(cfg)
    path = tmp_path / "r.json"
    emit_report(rep, format="json", path=path)
    assert McReport.from_dict(load_report(path)).to_dict() == rep.to_dict()
    text = emit_report(rep, format="text")
    assert "true" in text and "log_n" in text


def test_emit_report_guards(tmp_path):
    empty = McReport(kind="selection", config={}, rows=[{"completed": 0, "failed": 5}])
    with pytest.raises(ValueError):
        emit_report(empty, format="json")
    cfg = ExperimentConfig.from_dict({**AR1_DOC, "replications": 1})
    rep = run_selection_experiment(cfg)
    with pytest.raises(ValueError):
        emit_report(rep, format="xml")
