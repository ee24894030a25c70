import json

import numpy as np
import pytest

from sparsescale.analysis import SparsenessRecord, write_series_csv
from sparsescale.cli import main, parse_window
from sparsescale.field import GridSpec
from sparsescale.snapshot import FieldSnapshot, write_snapshot
from sparsescale.synthetic import ball_field

SMALL = """
[grid]
n = 16
[flow]
u0_amplitude = 1.0
reynolds = 100
[time]
t_end = 0.4
cfl_target = 0.5
snapshot_stride = 2
"""


def _digests(manifest_path):
    m = json.loads(manifest_path.read_text())
    return {e["path"]: e["sha256"] for e in m["outputs"]}


@pytest.fixture
def small_config(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text(SMALL)
    return p


def test_simulate_writes_snapshots_and_manifest(tmp_path, small_config, capsys):
    assert main(["simulate", str(small_config), "--out", str(tmp_path / "a")]) == 0
    out = tmp_path / "a"
    m = json.loads((out / "manifest.json").read_text())
    assert m["schema_version"] == 1 and m["command"] == "simulate"
    assert m["config"]["grid"]["n"] == 16
    paths = {e["path"] for e in m["outputs"]}
    assert "omega_max.csv" in paths and "snapshots/snap_0000.json" in paths
    assert all(len(e["sha256"]) == 64 for e in m["outputs"])
    header = (out / "omega_max.csv").read_text().splitlines()[0]
    assert header == "step,t,omega_max,energy,divergence"
    assert "simulate:" in capsys.readouterr().out


def test_simulate_deterministic_across_threads(tmp_path, small_config):
    assert main(["simulate", str(small_config), "--out", str(tmp_path / "a")]) == 0
    assert main(["simulate", str(small_config), "--out", str(tmp_path / "b"),
                 "--threads", "3"]) == 0
    assert _digests(tmp_path / "a" / "manifest.json") == _digests(tmp_path / "b" / "manifest.json")


def test_simulate_odd_n_is_config_error(tmp_path, capsys):
    p = tmp_path / "bad.ini"
    p.write_text("[grid]\nn = 33\n")
    assert main(["simulate", str(p)]) == 1
    assert "grid.n" in capsys.readouterr().err


def test_simulate_instability_exit_code(tmp_path, capsys):
    p = tmp_path / "unstable.ini"
    p.write_text("[grid]\nn = 16\n[flow]\nu0_amplitude = 1\nnu = 1e-6\n[time]\n"
                 "t_end = 200\ndt = 2\nsnapshot_stride = 1000\n")
    with np.errstate(all="ignore"):
        assert main(["simulate", str(p), "--out", str(tmp_path / "u")]) == 2
    assert "instability" in capsys.readouterr().err


def _ball_dir(tmp_path, radius=0.4, with_vorticity=True):
    g = GridSpec(32)
    s = ball_field(g, radius)
    om = np.where(s > 0, 0.5 + 0.5 * s / radius, np.clip(0.5 * (1 + s), 0, None))
    z = np.zeros(g.shape)
    d = tmp_path / "snaps"
    for i, t in enumerate((0.0, 1.0, 2.0)):
        fields = {"omega_x": z, "omega_y": z, "omega_z": om * (1 + 0.1 * i)}
        if not with_vorticity:
            fields = {"u_x": z, "u_y": z, "u_z": z}
        write_snapshot(d, f"snap_{i:04d}", FieldSnapshot(g, t, 1e-3, fields))
    return d, g


def test_measure_ball_directory(tmp_path):
    d, g = _ball_dir(tmp_path)
    out = tmp_path / "series.csv"
    assert main(["measure", str(d), "--oracle", "-o", str(out), "--refine-depth", "2"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "t,omega_max,d,r,lambda,r_oracle"
    rows = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    assert len(rows) == 3
    assert np.all(np.abs(rows[:, 3] - 0.4) <= g.spacing)
    assert np.all(np.abs(rows[:, 5] - rows[:, 3]) <= g.spacing)
    m = json.loads((tmp_path / "series.csv.manifest.json").read_text())
    assert m["config"]["oracle"] is True
    assert any(e["path"].endswith(".omega_z.bin") for e in m["inputs"])


def test_measure_window(tmp_path):
    d, _ = _ball_dir(tmp_path)
    out = tmp_path / "w.csv"
    assert main(["measure", str(d), "--window", "0.5:2", "-o", str(out),
                 "--refine-depth", "0"]) == 0
    assert len(out.read_text().splitlines()) == 3


def test_measure_empty_directory(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    assert main(["measure", str(tmp_path / "empty")]) == 1
    assert "no snapshots" in capsys.readouterr().err


def test_measure_missing_vorticity(tmp_path, capsys):
    d, _ = _ball_dir(tmp_path, with_vorticity=False)
    assert main(["measure", str(d)]) == 1
    assert "re-derive" in capsys.readouterr().err


def test_measure_bad_window(tmp_path, capsys):
    d, _ = _ball_dir(tmp_path)
    assert main(["measure", str(d), "--window", "3:1"]) == 1


def _power_csv(path, slope=1.098, intercept=2.17, n=40, wobble=0.0):
    t = np.arange(n, dtype=float)
    d = np.geomspace(0.05, 0.005, n)
    r = np.exp(intercept) * d**slope * np.exp(wobble * np.sin(2 * np.pi * t / 8))
    write_series_csv([SparsenessRecord(ti, 1.0, di, ri, 0.5) for ti, di, ri in zip(t, d, r)],
                     path)


def test_regress_exact(tmp_path):
    csv = tmp_path / "s.csv"
    _power_csv(csv)
    assert main(["regress", str(csv), "-o", str(tmp_path / "rep.json")]) == 0
    rep = json.loads((tmp_path / "rep.json").read_text())
    assert abs(rep["slope"] - 1.098) < 1e-12
    assert abs(rep["intercept"] - 2.17) < 1e-12
    assert rep["log_base"] == "e" and rep["filter"]["applied"] is False
    plot = (tmp_path / "rep.plot.csv").read_text().splitlines()
    assert plot[0] == "log_d,log_r,fit_log_r" and len(plot) == 41


def test_regress_filter_tightens_fit(tmp_path):
    csv = tmp_path / "s.csv"
    _power_csv(csv, slope=1.5, wobble=0.3, n=96)
    assert main(["regress", str(csv), "--filter-cyclic", "-o", str(tmp_path / "r.json")]) == 0
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["filter"]["r"]["period_samples"] == 8
    assert rep["slope_stderr"] < rep["unfiltered"]["slope_stderr"]


def test_regress_malformed(tmp_path, capsys):
    csv = tmp_path / "bad.csv"
    csv.write_text("t,omega_max,d,r,lambda\n0,1,0.1,0.2,0.5\n1,1,oops,0.2,0.5\n")
    assert main(["regress", str(csv)]) == 1
    assert "line 3" in capsys.readouterr().err


def test_regress_too_few_rows(tmp_path, capsys):
    csv = tmp_path / "few.csv"
    csv.write_text("t,omega_max,d,r,lambda\n0,1,0.1,0.2,0.5\n1,1,0.2,0.3,0.5\n")
    assert main(["regress", str(csv)]) == 1
    assert "at least 3" in capsys.readouterr().err


def test_regress_deterministic(tmp_path):
    csv = tmp_path / "s.csv"
    _power_csv(csv, wobble=0.1)
    for name in ("a", "b"):
        assert main(["regress", str(csv), "--filter-cyclic", "-o", str(tmp_path / f"{name}.json")]) == 0
    a = _digests(tmp_path / "a.json.manifest.json")
    b = _digests(tmp_path / "b.json.manifest.json")
    assert sorted(a.values()) == sorted(b.values())


def test_validate_only_distance(capsys):
    assert main(["validate", "--only", "distance"]) == 0
    out = capsys.readouterr().out
    assert "[PASS] distance" in out and "pruning" not in out


def test_validate_fault_injection(tmp_path, capsys):
    rep = tmp_path / "v.json"
    assert main(["validate", "--only", "pruning", "--inject-fault", "pruning",
                 "--report", str(rep)]) == 2
    assert "[FAIL] pruning" in capsys.readouterr().out
    assert json.loads(rep.read_text())["failed"] == ["pruning"]


def test_default_config_command(capsys):
    assert main(["default-config"]) == 0
    assert "[grid]" in capsys.readouterr().out


def test_parse_window():
    assert parse_window("all") is None
    assert parse_window("auto") == "auto"
    assert parse_window("1:2.5") == (1.0, 2.5)
