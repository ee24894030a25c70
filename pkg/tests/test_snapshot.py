import json

import numpy as np
import pytest

from sparsescale.field import GridSpec, curl
from sparsescale.snapshot import (
    FieldSnapshot,
    SnapshotError,
    list_snapshots,
    read_snapshot,
    write_snapshot,
)
from sparsescale.synthetic import taylor_green


def test_roundtrip(tmp_path, rng):
    g = GridSpec(8, 3.0)
    fields = {"u_x": rng.standard_normal(g.shape), "omega_y": rng.standard_normal(g.shape)}
    snap = FieldSnapshot(g, 1.25, 0.01, fields, step=7)
    paths = write_snapshot(tmp_path, "s", snap)
    back = read_snapshot(paths[0])
    assert back.time == 1.25 and back.nu == 0.01 and back.step == 7
    assert back.grid == g
    for k in fields:
        assert np.array_equal(back.fields[k], fields[k])
    assert list_snapshots(tmp_path) == [paths[0]]


def test_disk_layout_is_x_fastest(tmp_path):
    g = GridSpec(4)
    a = np.zeros(g.shape)
    a[1, 0, 0] = 1.0
    a[0, 1, 0] = 2.0
    write_snapshot(tmp_path, "s", FieldSnapshot(g, 0.0, 1.0, {"f": a}))
    raw = np.fromfile(tmp_path / "s.f.bin", dtype="<f8")
    assert raw[1] == 1.0 and raw[4] == 2.0
    header = json.loads((tmp_path / "s.json").read_text())
    assert header["order"] == "x-fastest" and header["endianness"] == "little"


def test_missing_vorticity_message(grid16):
    u = taylor_green(grid16, 0.1)
    snap = FieldSnapshot(grid16, 0.0, 0.1, dict(zip(("u_x", "u_y", "u_z"), u)))
    with pytest.raises(SnapshotError, match="re-derive"):
        snap.vorticity
    snap.derive_vorticity()
    assert np.allclose(snap.vorticity, curl(u, grid16))


def test_truncated_field_rejected(tmp_path):
    g = GridSpec(4)
    write_snapshot(tmp_path, "s", FieldSnapshot(g, 0.0, 1.0, {"f": np.zeros(g.shape)}))
    (tmp_path / "s.f.bin").write_bytes(b"\0" * 16)
    with pytest.raises(SnapshotError, match="wrong size"):
        read_snapshot(tmp_path / "s.json")


def test_bad_header(tmp_path):
    (tmp_path / "x.json").write_text("{not json")
    with pytest.raises(SnapshotError):
        read_snapshot(tmp_path / "x.json")
    assert list_snapshots(tmp_path) == []
    with pytest.raises(SnapshotError):
        list_snapshots(tmp_path / "nope")
