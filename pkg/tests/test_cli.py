import json

import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from affinecausal.cli import main


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def workdir(tmp_path):
    (tmp_path / "ar2.yaml").write_text(
        "model:\n  family: {kind: ar, p: 2}\nparams: [1.0, 0.4, 0.4]\n"
    )
    (tmp_path / "grid.yaml").write_text("kind: ar_subsets\np_max: 3\n")
    return tmp_path


def _invoke(runner, args):
    return runner.invoke(main, [str(a) for a in args])


def test_simulate_deterministic(runner, workdir):
    args = ["simulate", workdir / "ar2.yaml", "-n", 50, "--seed", 9]
    r1 = _invoke(runner, args)
    r2 = _invoke(runner, args)
    assert r1.exit_code == 0
    assert r1.output == r2.output
    assert len(r1.output.strip().splitlines()) == 50


def test_fit_and_test_commands(runner, workdir):
    series = workdir / "x.txt"
    r = _invoke(runner, ["simulate", workdir / "ar2.yaml", "-n", 400, "-o", series])
    assert r.exit_code == 0
    r = _invoke(runner, ["fit", workdir / "ar2.yaml", series])
    assert r.exit_code == 0 and "phi1" in r.output
    r = _invoke(runner, ["test", workdir / "ar2.yaml", series, "-K", 3])
    assert r.exit_code == 0 and "p-value" in r.output


def test_select_json(runner, workdir):
    series = workdir / "x.txt"
    _invoke(runner, ["simulate", workdir / "ar2.yaml", "-n", 400, "-o", series])
    r = _invoke(runner, ["select", workdir / "grid.yaml", series, "--format", "json"])
    assert r.exit_code == 0
    doc = json.loads(r.output)
    assert len(doc["candidates"]) == 8
    assert doc["candidates"][doc["chosen"]]["failed"] is False


def test_pipeline_command(runner, tmp_path):
    rng = np.random.default_rng(3)
    prices = 100 * np.exp(np.cumsum(0.01 * rng.standard_normal(300)))
    data = tmp_path / "prices.txt"
    data.write_text("\n".join(f"{p:.8f}" for p in prices) + "\n")
    grid = tmp_path / "grid.yaml"
    grid.write_text("kind: garch_grid\np_max: 1\nq_max: 1\n")
    r = _invoke(runner, ["pipeline", grid, data, "--penalty", "sqrt_n", "--format", "json"])
    assert r.exit_code == 0
    doc = json.loads(r.output)
    assert doc["n"] == 299
    assert doc["tests"][0]["portmanteau"]["df"] == 3


def test_mc_select_byte_identical(runner, tmp_path):
    cfg = tmp_path / "exp.yaml"
    cfg.write_text(
        yaml.safe_dump(
            {
                "truth": {"model": {"family": {"kind": "ar", "p": 1}}, "params": [1.0, 0.5]},
                "candidates": {
                    "kind": "list",
                    "models": [
                        {"family": {"kind": "white_noise"}},
                        {"family": {"kind": "ar", "p": 1}},
                    ],
                },
                "penalties": ["log_n"],
                "sample_sizes": [200],
                "replications": 3,
                "restarts": 1,
            }
        )
    )
    out1, out2 = tmp_path / "r1.json", tmp_path / "r2.json"
    assert _invoke(runner, ["mc-select", cfg, "--format", "json", "-o", out1]).exit_code == 0
    assert _invoke(runner, ["mc-select", cfg, "--format", "json", "-o", out2]).exit_code == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_mc_sizepower_command(runner, tmp_path):
    cfg = tmp_path / "exp.yaml"
    cfg.write_text(
        yaml.safe_dump(
            {
                "truth": {"model": {"family": {"kind": "arch", "p": 1}}, "params": [0.3, 0.4]},
                "candidates": {
                    "kind": "list",
                    "models": [{"family": {"kind": "arch", "p": 1}}],
                },
                "sample_sizes": [300],
                "replications": 3,
                "restarts": 1,
                "K": [3],
            }
        )
    )
    r = _invoke(runner, ["mc-sizepower", cfg])
    assert r.exit_code == 0 and "size" in r.output


def test_errors_exit_nonzero(runner, workdir, tmp_path):
    r = _invoke(runner, ["fit", workdir / "ar2.yaml", tmp_path / "missing.txt"])
    assert r.exit_code != 0

    bad = tmp_path / "bad.txt"
    bad.write_text("1.0\nnot-a-number\n2.0\n")
    r = _invoke(runner, ["fit", workdir / "ar2.yaml", bad])
    assert r.exit_code == 1
    assert "error:" in r.stderr and "2" in r.stderr

    no_params = tmp_path / "np.yaml"
    no_params.write_text("model:\n  family: {kind: ar, p: 1}\n")
    r = _invoke(runner, ["simulate", no_params, "-n", 10])
    assert r.exit_code == 1 and "error:" in r.stderr
