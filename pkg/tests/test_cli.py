"""CLI tests on shortened horizons: run-matrix layout, aggregation output,
reruns, calibration semantics and exit codes."""

import csv
import filecmp
import json
import os

import pytest

from crossflux.cli import calibrate_threshold, main
from crossflux.scenario import default_case_study

SHORT = ["--warmup", "30", "--evaluation", "90"]


def read_summary_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_single_condition_run_layout(tmp_path):
    out = str(tmp_path / "exp")
    rc = main(["run", "--condition", "homogeneous-20db-corrected",
               "--replications", "2", "--seed", "7", "--out", out] + SHORT)
    assert rc == 0
    base = os.path.join(out, "homogeneous-20db-corrected")
    assert sorted(os.listdir(base)) == ["rep00", "rep01"]
    with open(os.path.join(base, "rep00", "summary.json")) as fh:
        s0 = json.load(fh)
    with open(os.path.join(base, "rep01", "summary.json")) as fh:
        s1 = json.load(fh)
    assert s0["seed"] == 7 and s1["seed"] == 8
    rows = read_summary_csv(os.path.join(out, "summary.csv"))
    assert len(rows) == 1
    assert rows[0]["condition"] == "homogeneous-20db-corrected"
    assert rows[0]["replications"] == "2"
    assert os.path.exists(os.path.join(out, "sg_delays.csv"))
    assert os.path.exists(os.path.join(out, "sg_events.csv"))


def test_all_produces_full_matrix(tmp_path):
    out = str(tmp_path / "exp")
    rc = main(["run", "--all", "--replications", "1", "--seed", "1",
               "--out", out, "--trace-level", "summary", "--jobs", "2"] + SHORT)
    assert rc == 0
    rows = read_summary_csv(os.path.join(out, "summary.csv"))
    assert len(rows) == 15
    run_dirs = [d for d in os.listdir(out) if os.path.isdir(os.path.join(out, d))]
    assert len(run_dirs) == 15


def test_rerun_is_byte_identical(tmp_path):
    args = ["run", "--condition", "baseline", "--replications", "2",
            "--seed", "3", "--trace-level", "summary"] + SHORT
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(args + ["--out", out1]) == 0
    assert main(args + ["--out", out2]) == 0
    assert filecmp.cmp(os.path.join(out1, "summary.csv"),
                       os.path.join(out2, "summary.csv"), shallow=False)


def test_adhoc_zero_penalty_envs_identical(tmp_path):
    outs = []
    for name, env in (("hom", "homogeneous"), ("het", "heterogeneous")):
        out = str(tmp_path / name)
        rc = main(["run", "--env", env, "--snr-penalty", "0",
                   "--replications", "1", "--seed", "2", "--out", out] + SHORT)
        assert rc == 0
        outs.append(out)
    dir_h = os.path.join(outs[0], "homogeneous-00db-uncorrected", "rep00")
    dir_t = os.path.join(outs[1], "heterogeneous-00db-uncorrected", "rep00")
    for name in sorted(os.listdir(dir_h)):
        assert filecmp.cmp(os.path.join(dir_h, name),
                           os.path.join(dir_t, name), shallow=False)


def test_env_var_overrides_out_flag(tmp_path, monkeypatch):
    env_out = str(tmp_path / "env")
    flag_out = str(tmp_path / "flag")
    monkeypatch.setenv("CROSSFLUX_OUT", env_out)
    rc = main(["run", "--condition", "baseline", "--replications", "1",
               "--seed", "1", "--out", flag_out, "--trace-level", "summary"] + SHORT)
    assert rc == 0
    assert os.path.exists(os.path.join(env_out, "summary.csv"))
    assert not os.path.exists(flag_out)


def test_missing_out_is_usage_error(monkeypatch):
    monkeypatch.delenv("CROSSFLUX_OUT", raising=False)
    assert main(["run", "--condition", "baseline"]) == 2


def test_unknown_condition_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["run", "--condition", "bogus", "--out", str(tmp_path)])
    assert e.value.code == 2


def test_invalid_scenario_is_usage_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"control": {"max_gap_s": 0.0}}))
    rc = main(["run", "--scenario", str(bad), "--condition", "baseline",
               "--out", str(tmp_path / "o")] + SHORT)
    assert rc == 2


def test_calibrate_boundary_low_target(capsys):
    scn = default_case_study()
    threshold, achieved = calibrate_threshold(scn, 0.0, warmup=20.0, evaluation=60.0)
    assert threshold == 0.0
    assert "warning" in capsys.readouterr().err


def test_calibrate_unreachable_target():
    scn = default_case_study()
    with pytest.raises(ValueError):
        calibrate_threshold(scn, 0.999, warmup=20.0, evaluation=60.0)


def test_calibrate_monotone_in_target():
    scn = default_case_study()
    t_low, m_low = calibrate_threshold(scn, 0.15, warmup=20.0, evaluation=120.0,
                                       tolerance=0.02)
    t_high, m_high = calibrate_threshold(scn, 0.40, warmup=20.0, evaluation=120.0,
                                         tolerance=0.02)
    assert t_high > t_low
    assert m_high > m_low


def test_calibrate_cli_prints_json(tmp_path, capsys):
    rc = main(["calibrate", "--target-mlr", "0.2", "--warmup", "20",
               "--evaluation", "60", "--tolerance", "0.05"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert 0.0 <= out["snr_threshold_db"] <= 40.0
    assert abs(out["achieved_mlr"] - 0.2) <= 0.08
