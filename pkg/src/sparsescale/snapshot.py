"""Time-stamped field snapshots and their on-disk format.

A snapshot on disk is a JSON header ``<stem>.json`` plus one raw file
``<stem>.<field>.bin`` per named field holding ``n**3`` little-endian
float64 values in x-fastest order.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .field import GridSpec, curl

SCHEMA_VERSION = 1
VELOCITY_NAMES = ("u_x", "u_y", "u_z")
VORTICITY_NAMES = ("omega_x", "omega_y", "omega_z")


class SnapshotError(ValueError):
    pass


@dataclass
class FieldSnapshot:
    """Named fields on one grid at one instant, with physical metadata."""

    grid: GridSpec
    time: float
    nu: float
    fields: dict = field(default_factory=dict)
    step: int = 0

    def has_vector(self, names):
        return all(name in self.fields for name in names)

    def vector(self, names):
        return np.stack([self.fields[name] for name in names])

    @property
    def velocity(self):
        if not self.has_vector(VELOCITY_NAMES):
            raise SnapshotError("snapshot carries no velocity fields")
        return self.vector(VELOCITY_NAMES)

    @property
    def vorticity(self):
        if not self.has_vector(VORTICITY_NAMES):
            raise SnapshotError(
                "snapshot carries no vorticity fields (omega_x, omega_y, omega_z); "
                "re-derive them from the velocity with derive_vorticity()"
            )
        return self.vector(VORTICITY_NAMES)

    def derive_vorticity(self):
        """Add vorticity fields computed spectrally from the velocity."""
        omega = curl(self.velocity, self.grid)
        for name, comp in zip(VORTICITY_NAMES, omega):
            self.fields[name] = comp
        return self


def _to_disk(values):
    # memory layout [ix, iy, iz] -> x-fastest is Fortran order
    return np.asarray(values, dtype="<f8").ravel(order="F")


def _from_disk(raw, n):
    return np.asarray(raw, dtype=np.float64).reshape((n, n, n), order="F")


def header_dict(snapshot):
    return {
        "schema_version": SCHEMA_VERSION,
        "n": snapshot.grid.n,
        "domain_length": snapshot.grid.domain_length,
        "nu": snapshot.nu,
        "time": snapshot.time,
        "step": snapshot.step,
        "field_names": list(snapshot.fields),
        "dtype": "f64",
        "order": "x-fastest",
        "endianness": "little",
    }


def write_snapshot(directory, stem, snapshot):
    """Write ``snapshot`` under ``directory``; return the list of files written."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, values in snapshot.fields.items():
        path = directory / f"{stem}.{name}.bin"
        path.write_bytes(_to_disk(values).tobytes())
        written.append(path)
    header = directory / f"{stem}.json"
    header.write_text(json.dumps(header_dict(snapshot), indent=2) + "\n")
    written.insert(0, header)
    return written


def read_snapshot(header_path):
    header_path = Path(header_path)
    try:
        header = json.loads(header_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SnapshotError(f"{header_path}: unreadable header ({exc})") from exc
    for key in ("n", "domain_length", "nu", "time", "field_names"):
        if key not in header:
            raise SnapshotError(f"{header_path}: header lacks '{key}'")
    if header.get("dtype", "f64") != "f64" or header.get("order", "x-fastest") != "x-fastest":
        raise SnapshotError(f"{header_path}: only f64 x-fastest snapshots are supported")
    if header.get("endianness", "little") != "little":
        raise SnapshotError(f"{header_path}: only little-endian snapshots are supported")
    grid = GridSpec(int(header["n"]), float(header["domain_length"]))
    stem = header_path.name[: -len(".json")]
    fields = {}
    for name in header["field_names"]:
        path = header_path.with_name(f"{stem}.{name}.bin")
        raw = np.fromfile(path, dtype="<f8") if path.exists() else None
        if raw is None or raw.size != grid.n**3:
            raise SnapshotError(f"{path}: missing or wrong size (expected {grid.n**3} values)")
        fields[name] = _from_disk(raw, grid.n)
    return FieldSnapshot(grid, float(header["time"]), float(header["nu"]), fields,
                         int(header.get("step", 0)))


def list_snapshots(directory):
    """Snapshot header paths in ``directory`` sorted by name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise SnapshotError(f"{directory}: not a directory")
    found = []
    for path in sorted(directory.glob("*.json")):
        try:
            header = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError):
            continue
        if isinstance(header, dict) and "field_names" in header:
            found.append(path)
    return found
