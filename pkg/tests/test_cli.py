import csv
import io
import json

import numpy as np
import pytest

from zalms.cli import EXIT_COMPUTE, EXIT_CONFIG, EXIT_OK, EXIT_VERIFY, main
from zalms.errors import ConfigError
from zalms.experiment import (DEFAULT_W_STAR, ExperimentConfig, config_from_dict, load_config,
                              run_experiment, verify_lemmas)

SMALL = {"run": {"iters": 120, "runs": 70}, "joint_dumps": [{"i": 2, "j": 7, "at_iter": 60,
                                                           "samples": 80}]}


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return p


def read_csv(path):
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    return rows[0], rows[1:]


# ---------------------------------------------------------------- config

def test_empty_config_gives_defaults(tmp_path):
    c = load_config(write(tmp_path, {}))
    assert len(c.plant.w_star) == 17
    assert c.plant.w_star == list(DEFAULT_W_STAR)
    assert (c.algo.mu, c.algo.lambda_, c.plant.noise_var) == (0.01, 0.01, 0.01)
    assert (c.input.ar_coeff, c.input.innovation_var) == (0.6, 0.64)
    assert (c.run.runs, c.run.iters, c.models) == (500, 1000, ["exact", "baseline"])
    assert [(d.i, d.j, d.at_iter, d.samples) for d in c.joint_dumps] == [
        (2, 7, 800, 5000), (2, 7, 100, 5000), (8, 9, 800, 5000)]


def test_single_field_override(tmp_path):
    c = load_config(write(tmp_path, {"algo": {"lambda": 0.001}}))
    assert c.algo.lambda_ == 0.001 and c.algo.mu == 0.01


@pytest.mark.parametrize("obj,path", [
    ({"input": {"ar_coeff": 1.2}}, "input.ar_coeff"),
    ({"algo": {"mu": -1}}, "algo.mu"),
    ({"plant": {"noise": 1}}, "plant.noise"),
    ({"extra": 1}, "extra"),
    ({"models": ["exact", "fancy"]}, "models.1"),
    ({"joint_dumps": [{"i": 2, "j": 40, "at_iter": 5}]}, "tap index"),
    ({"run": {"iters": 10}, "joint_dumps": [{"i": 0, "j": 1, "at_iter": 11}]}, "at_iter"),
])
def test_config_errors_name_the_key(tmp_path, obj, path):
    with pytest.raises(ConfigError, match=path.replace(".", r"\.")):
        load_config(write(tmp_path, obj))


def test_invalid_json_reports_position(tmp_path):
    with pytest.raises(ConfigError, match="line 1 column"):
        load_config(write(tmp_path, "{nope"))


def test_default_dumps_dropped_for_short_runs():
    assert config_from_dict({"run": {"iters": 200}}).joint_dumps[0].at_iter == 100
    assert len(config_from_dict({"run": {"iters": 200}}).joint_dumps) == 1


# ---------------------------------------------------------------- experiment

@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    res = run_experiment(config_from_dict(SMALL), out)
    return out, res


def test_output_files(small_run):
    out, res = small_run
    names = sorted(p.name for p in out.iterdir())
    assert names == ["comparison.csv", "joint_2_7_60.csv", "manifest.json", "mc.csv",
                     "theory_baseline.csv", "theory_exact.csv"]


def test_mc_schema(small_run):
    out, _ = small_run
    header, rows = read_csv(out / "mc.csv")
    assert header[:3] == ["n", "mse", "emse"]
    assert header[3:20] == [f"m_{k}" for k in range(17)]
    assert header[20:] == ["mse_stderr", "emse_stderr"]
    assert len(rows) == 120


def test_comparison_schema(small_run):
    out, _ = small_run
    header, rows = read_csv(out / "comparison.csv")
    assert header == ["n", "mse_theory", "mse_mc", "mse_mc_stderr", "emse_theory", "emse_mc",
                      "emse_mc_stderr", "emse_in_band"]
    assert {r[-1] for r in rows} <= {"0", "1"}


def test_csv_round_trip_is_exact(small_run):
    out, res = small_run
    _, rows = read_csv(out / "theory_exact.csv")
    curve = res.curves["exact"]
    assert np.array_equal(np.array([float(r[2]) for r in rows]), curve.emse)
    assert np.array_equal(np.array([[float(v) for v in r[3:]] for r in rows]), curve.m)
    _, rows = read_csv(out / "mc.csv")
    assert np.array_equal(np.array([float(r[1]) for r in rows]), res.stats.mse)


def test_joint_csv(small_run):
    out, res = small_run
    header, rows = read_csv(out / "joint_2_7_60.csv")
    assert header == ["run", "wt_2", "wt_7"]
    assert len(rows) == 80
    np.testing.assert_array_equal(np.array([[float(a), float(b)] for _, a, b in rows]),
                                  res.joint[0].values)


def test_manifest(small_run):
    out, res = small_run
    man = json.loads((out / "manifest.json").read_text())
    assert man["tool"] == "zalms" and man["master_seed"] == 2017
    assert man["config"]["algo"]["lambda"] == 0.01
    assert set(man["files"]) == {"comparison.csv", "joint_2_7_60.csv", "mc.csv",
                                 "theory_baseline.csv", "theory_exact.csv"}
    assert "wall_time_s" in man and "version" in man
    assert "exact" in man["summary"]["models"]


def test_rerun_from_manifest_is_byte_identical(small_run, tmp_path):
    out, res = small_run
    again = run_experiment(load_config(out / "manifest.json"), tmp_path, workers=2)
    assert again.files == res.files
    for name in res.files:
        assert (tmp_path / name).read_bytes() == (out / name).read_bytes()


def test_exact_only_and_no_mc(tmp_path):
    cfg = config_from_dict({**SMALL, "models": ["exact"]})
    run_experiment(cfg, tmp_path, run_mc=False)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["manifest.json", "theory_exact.csv"]


# ---------------------------------------------------------------- command line

def test_cli_run(tmp_path):
    cfg = write(tmp_path, SMALL)
    code = main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--models", "exact",
                 "--seed", "5", "--iters", "80", "--runs", "10", "--quiet"])
    assert code == EXIT_OK
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["config"]["run"] == {"iters": 80, "runs": 10, "master_seed": 5}
    assert not (tmp_path / "o" / "theory_baseline.csv").exists()


def test_cli_config_error(tmp_path, capsys):
    code = main(["run", "--config", str(write(tmp_path, {"input": {"ar_coeff": 1.2}})),
                 "--out", str(tmp_path / "o")])
    assert code == EXIT_CONFIG
    assert "input.ar_coeff" in capsys.readouterr().err


def test_cli_missing_config(tmp_path):
    assert main(["run", "--config", str(tmp_path / "absent.json")]) == EXIT_CONFIG


def test_cli_compute_error(tmp_path, capsys):
    cfg = write(tmp_path, {"algo": {"mu": 5.0}, "run": {"iters": 300, "runs": 4},
                           "models": ["exact"], "joint_dumps": []})
    code = main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--quiet"])
    assert code == EXIT_COMPUTE
    assert "compute error" in capsys.readouterr().err


def test_cli_verify_detects_flipped_sign(capsys):
    assert main(["verify-lemmas", "--inject-flipped-sign"]) == EXIT_VERIFY
    assert "FAIL cross_moment" in capsys.readouterr().out


def test_verify_high_correlation_grid():
    rep = verify_lemmas("high_corr")
    assert rep.passed and rep.tol == 1e-5
    assert rep.tuples >= 200
