import csv
import json
import subprocess
import sys

import pytest

import rangenav.cli as cli
from rangenav.harness import RunError
from rangenav.sim import STREAM_COLUMNS


@pytest.fixture
def short_scenario(tmp_path):
    data = json.loads((cli.Path(cli.__file__).parent / "data" / "paper.json").read_text())
    data["duration_s"] = 1.0
    path = tmp_path / "short.json"
    path.write_text(json.dumps(data))
    return str(path)


def read_rows(path):
    with open(path) as f:
        return list(csv.DictReader(f))


def test_run_writes_both_csvs(short_scenario, tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["run", "--scenario", short_scenario, "--out", str(out)]) == 0
    rows = read_rows(out / "timeseries.csv")
    assert len(rows) == 501
    assert {"sd_x", "anchor_id", "yaw_hat"} <= set(rows[0])
    streams = read_rows(out / "measurements.csv")
    assert list(streams[0]) == list(STREAM_COLUMNS)
    assert {r["kind"] for r in streams} == {"truth", "imu", "range"}
    assert "rmse position" in capsys.readouterr().out


def test_quiet_prints_nothing(short_scenario, tmp_path, capsys):
    assert cli.main(["run", "--scenario", short_scenario, "--out", str(tmp_path), "--quiet", "--no-streams"]) == 0
    assert capsys.readouterr().out == ""
    assert not (tmp_path / "measurements.csv").exists()


def test_run_is_byte_identical(short_scenario, tmp_path):
    for name in ("a", "b"):
        assert cli.main(["run", "--scenario", short_scenario, "--out", str(tmp_path / name), "--quiet"]) == 0
    for f in ("timeseries.csv", "measurements.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_policies_share_noise_but_pick_differently(short_scenario, tmp_path):
    for pol in ("greedy", "sequential"):
        args = ["run", "--scenario", short_scenario, "--policy", pol, "--seed", "3", "--out", str(tmp_path / pol), "--quiet"]
        assert cli.main(args) == 0
    g = read_rows(tmp_path / "greedy" / "measurements.csv")
    s = read_rows(tmp_path / "sequential" / "measurements.csv")
    assert [r for r in g if r["kind"] != "range"] == [r for r in s if r["kind"] != "range"]
    assert [r["anchor_id"] for r in g if r["kind"] == "range"] != [r["anchor_id"] for r in s if r["kind"] == "range"]


def test_compare_writes_table_shaped_summary(short_scenario, tmp_path, capsys):
    args = ["compare", "--scenario", short_scenario, "--runs", "2", "--seed", "1", "--out", str(tmp_path)]
    assert cli.main(args) == 0
    with open(tmp_path / "summary.csv") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["run", "pos_seq", "pos_opt", "vel_seq", "vel_opt", "att_seq", "att_opt"]
    assert [r[0] for r in rows[1:]] == ["1", "2", "avg", "diff"]
    assert "diff" in capsys.readouterr().out


def test_missing_scenario_exits_1(tmp_path, capsys):
    missing = tmp_path / "absent.json"
    assert cli.main(["run", "--scenario", str(missing), "--out", str(tmp_path)]) == 1
    assert str(missing) in capsys.readouterr().err


def test_bad_run_count_exits_1(short_scenario, tmp_path):
    assert cli.main(["compare", "--scenario", short_scenario, "--runs", "0", "--out", str(tmp_path)]) == 1


def test_runtime_failure_exits_2(short_scenario, tmp_path, monkeypatch, capsys):
    def fail(*args, **kwargs):
        raise RunError("t=0.0100s: covariance has non-finite entries")

    monkeypatch.setattr(cli, "run_scenario", fail)
    assert cli.main(["run", "--scenario", short_scenario, "--out", str(tmp_path)]) == 2
    assert "t=0.0100s" in capsys.readouterr().err


def test_validate_passes(capsys):
    assert cli.main(["validate"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 4 and "FAIL" not in out


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "rangenav", "run", "--scenario", str(tmp_path / "x.json")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 1
    assert "scenario file not found" in proc.stderr
