"""Command-line entry point: ``sparsescale {simulate,measure,regress,validate}``.

Exit codes: 0 success, 1 configuration or input validation error, 2 runtime
or numerical failure (including failed validation checks).
"""

import argparse
import hashlib
import json
import logging
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    SeriesFormatError,
    assemble_timeseries,
    default_window,
    filter_records,
    ingest_external_series,
    loglog_regression,
    write_plot_csv,
    write_series_csv,
)
from .checks import CHECKS, FAULTS, run_checks
from .config import ConfigError, MeasureConfig, default_config_text, load_config
from .field import set_threads
from .snapshot import SnapshotError, list_snapshots, read_snapshot, write_snapshot
from .solver import InstabilityError, simulate

logger = logging.getLogger("sparsescale")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
MANIFEST_SCHEMA = 1


class UsageError(ValueError):
    """Bad command-line input; maps to exit code 1."""


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _entries(paths, base):
    out = []
    for p in paths:
        p = Path(p)
        try:
            name = p.resolve().relative_to(base.resolve()).as_posix()
        except ValueError:
            name = str(p)
        out.append({"path": name, "sha256": sha256_file(p)})
    return out


def write_manifest(path, command, config, inputs, outputs, seconds, warning_list):
    """RunManifest JSON: config echo, digests of every input and output file,
    timing and collected warnings. Paths are relative to the manifest."""
    path = Path(path)
    base = path.parent
    manifest = {
        "schema_version": MANIFEST_SCHEMA,
        "tool": "sparsescale",
        "version": __version__,
        "command": command,
        "config": config,
        "inputs": _entries(inputs, base),
        "outputs": _entries(outputs, base),
        "timing": {"wall_seconds": round(seconds, 3)},
        "warnings": list(warning_list),
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def parse_window(text):
    """``"all"`` -> None, ``"auto"`` -> ``"auto"``, ``"A:B"`` -> ``(A, B)``."""
    if text is None or text == "all":
        return None
    if text == "auto":
        return "auto"
    try:
        a, b = (float(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"--window must be 'all', 'auto' or 'T_A:T_B', got {text!r}") from None
    if not a <= b:
        raise UsageError(f"--window start {a} exceeds end {b}")
    return (a, b)


# --- simulate -----------------------------------------------------------------

def cmd_simulate(args):
    cfg = load_config(args.config)
    out = Path(args.out if args.out else cfg.output_directory)
    snap_dir = out / "snapshots"
    snap_dir.mkdir(parents=True, exist_ok=True)
    outputs = []

    def on_snapshot(i, snap):
        outputs.extend(write_snapshot(snap_dir, f"snap_{i:04d}", snap))

    try:
        res = simulate(cfg.solver, on_snapshot=on_snapshot, keep_snapshots=False)
    except InstabilityError as exc:
        raise InstabilityError(f"simulate {args.config}: {exc}") from exc
    series = out / "omega_max.csv"
    lines = ["step,t,omega_max,energy,divergence"]
    for row in zip(res.steps, res.times, res.omega_max, res.energy, res.divergence):
        lines.append(f"{int(row[0])}," + ",".join(repr(float(v)) for v in row[1:]))
    series.write_text("\n".join(lines) + "\n")
    outputs.append(series)
    echo = cfg.echo()
    echo["time"]["dt_used"] = res.dt
    echo["time"]["n_steps"] = res.n_steps
    n_snap = sum(1 for p in outputs if p.suffix == ".json")
    print(f"simulate: {res.n_steps} steps of dt={res.dt:.6g}, {n_snap} snapshots -> {out}")
    return out / "manifest.json", echo, [Path(args.config)], outputs


# --- measure -------------------------------------------------------------------

def _auto_window(snap_dir, paths):
    table = Path(snap_dir) / "omega_max.csv"
    if not table.exists():
        table = Path(snap_dir).parent / "omega_max.csv"
    if table.exists():
        data = np.genfromtxt(table, delimiter=",", names=True)
        return default_window(data["t"], data["omega_max"])
    times, wmax = [], []
    for p in paths:
        snap = read_snapshot(p)
        times.append(snap.time)
        wmax.append(float(np.max(np.abs(snap.vorticity))))
    return default_window(times, wmax)


def _prepared_snapshots(paths, derive):
    for p in paths:
        snap = read_snapshot(p)
        if derive and not snap.has_vector(("omega_x", "omega_y", "omega_z")):
            snap.derive_vorticity()
        yield snap


def cmd_measure(args):
    mc = load_config(args.config).measure if args.config else MeasureConfig()
    lam = args.lam if args.lam is not None else mc.lam
    conn = args.connectivity if args.connectivity is not None else mc.connectivity
    depth = args.refine_depth if args.refine_depth is not None else mc.refine_depth
    if not 0 < lam < 1:
        raise UsageError(f"--lambda must lie in (0, 1), got {lam}")
    snap_dir = Path(args.snapshots)
    paths = list_snapshots(snap_dir)
    if not paths:
        raise SnapshotError(f"{snap_dir}: no snapshots found")
    for p in paths[:1]:
        snap = read_snapshot(p)
        if not args.derive_vorticity and not snap.has_vector(("omega_x", "omega_y", "omega_z")):
            raise SnapshotError(
                f"{p}: snapshot has no vorticity fields; re-derive them from the velocity "
                "by rerunning with --derive-vorticity")
    window = parse_window(args.window)
    if window == "auto":
        window = _auto_window(snap_dir, paths)
    records = assemble_timeseries(
        _prepared_snapshots(paths, args.derive_vorticity), lam, window, conn,
        oracle=args.oracle, sets=args.sets, refine_levels=depth, rays=mc.rays, seed=mc.seed,
    )
    if not records:
        raise SnapshotError("no records: every snapshot was outside the window or empty")
    out = Path(args.output) if args.output else snap_dir / "series.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_series_csv(records, out)
    echo = {"lambda": lam, "connectivity": conn, "refine_depth": depth, "rays": mc.rays,
            "seed": mc.seed, "window": list(window) if window else "all",
            "oracle": bool(args.oracle), "derive_vorticity": bool(args.derive_vorticity),
            "sets": args.sets}
    print(f"measure: {len(records)} records -> {out}")
    inputs = []
    for p in paths:
        inputs.append(p)
        inputs.extend(sorted(p.parent.glob(p.name[:-len(".json")] + ".*.bin")))
    return out.with_name(out.name + ".manifest.json"), echo, inputs, [out]


# --- regress -------------------------------------------------------------------

def cmd_regress(args):
    try:
        records = ingest_external_series(args.series)
    except OSError as exc:
        raise UsageError(f"cannot read {args.series}: {exc}") from None
    window = parse_window(args.window)
    if window == "auto":
        window = default_window([r.t for r in records], [r.omega_max for r in records])
    if window is not None:
        records = [r for r in records if window[0] <= r.t <= window[1]]
    if len(records) < 3:
        raise UsageError(f"need at least 3 rows in the window, got {len(records)}")
    report = {"window": list(window) if window else "all", "input": Path(args.series).name}
    filt_info = {"applied": False}
    if args.filter_cyclic:
        unfiltered = loglog_regression(records)
        columns = tuple(args.filter_columns.split(","))
        records, info = filter_records(records, columns, period=args.period)
        filt_info = {"applied": True, "columns": list(columns), "log_space": True}
        for col, res in info.items():
            filt_info[col] = {"flag": res.flag, "period_samples": res.period,
                              "acf_peak": res.acf_peak}
        report["unfiltered"] = unfiltered.to_dict()
    result = loglog_regression(records)
    report["filter"] = filt_info
    report.update(result.to_dict())
    out = Path(args.output) if args.output else Path(args.series).with_suffix(".report.json")
    plot = Path(args.plot) if args.plot else out.with_name(out.stem + ".plot.csv")
    out.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    write_plot_csv(records, result, plot)
    print(f"regress: {result.summary()}  (n={result.n_points}, r^2={result.r_squared:.4f})")
    echo = {"window": report["window"], "filter_cyclic": bool(args.filter_cyclic),
            "filter_columns": args.filter_columns, "period": args.period}
    return out.with_name(out.name + ".manifest.json"), echo, [Path(args.series)], [out, plot]


# --- validate ------------------------------------------------------------------

def cmd_validate(args):
    try:
        results = run_checks(args.only, args.inject_fault)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    for res in results:
        print(res.line())
    failed = [r.name for r in results if not r.passed]
    if args.report:
        Path(args.report).write_text(json.dumps(
            {"checks": [r.to_dict() for r in results], "failed": failed,
             "fault": args.inject_fault}, indent=2, sort_keys=True) + "\n")
    print(f"validate: {len(results) - len(failed)}/{len(results)} checks passed")
    return failed


# --- entry point -------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=1,
                        help="worker cap for FFTs (results do not depend on it)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="sparsescale", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="run the Kida-vortex solver")
    p.add_argument("config", help="INI run configuration")
    p.add_argument("--out", help="output directory (default: [output] directory)")

    p = sub.add_parser("measure", parents=[common], help="snapshots -> r(t), d(t) series")
    p.add_argument("snapshots", help="directory of snapshot headers")
    p.add_argument("--config", help="read [measure] defaults from this INI file")
    p.add_argument("--lambda", dest="lam", type=float, help="level fraction (default 0.5)")
    p.add_argument("--connectivity", type=int, choices=(6, 18, 26))
    p.add_argument("--refine-depth", type=int, dest="refine_depth")
    p.add_argument("--window", default="all", help="'all', 'auto' or T_A:T_B")
    p.add_argument("--oracle", action="store_true", help="add the voxel distance oracle column")
    p.add_argument("--sets", choices=("components", "magnitude"), default="components",
                   help="RIVs from the six component sets or the magnitude set")
    p.add_argument("--derive-vorticity", action="store_true",
                   help="compute missing vorticity from the velocity")
    p.add_argument("-o", "--output", help="series CSV (default: <snapshots>/series.csv)")

    p = sub.add_parser("regress", parents=[common], help="log-log fit of r against d")
    p.add_argument("series", help="CSV with header t,omega_max,d,r,lambda")
    p.add_argument("--filter-cyclic", action="store_true")
    p.add_argument("--filter-columns", default="r", help="comma list of d,r (default r)")
    p.add_argument("--period", type=int, help="override the detected period (samples)")
    p.add_argument("--window", default="all", help="'all', 'auto' or T_A:T_B")
    p.add_argument("-o", "--output", help="report JSON (default: <series>.report.json)")
    p.add_argument("--plot", help="plot-ready CSV (default: <report>.plot.csv)")

    p = sub.add_parser("validate", parents=[common], help="run the oracle cross-checks")
    p.add_argument("--only", action="append", choices=sorted(CHECKS),
                   help="run just this check (repeatable)")
    p.add_argument("--inject-fault", choices=FAULTS)
    p.add_argument("--report", help="write results as JSON")

    sub.add_parser("default-config", help="print the desk default configuration")
    return parser


COMMANDS = {"simulate": cmd_simulate, "measure": cmd_measure, "regress": cmd_regress}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "default-config":
        sys.stdout.write(default_config_text())
        return EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    set_threads(args.threads)
    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            if args.command == "validate":
                failed = cmd_validate(args)
                code = EXIT_RUNTIME if failed else EXIT_OK
                if failed:
                    print(f"failed checks: {', '.join(failed)}", file=sys.stderr)
                return code
            manifest_path, echo, inputs, outputs = COMMANDS[args.command](args)
        except (ConfigError, SnapshotError, SeriesFormatError, UsageError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INVALID
        except (InstabilityError, ArithmeticError, RuntimeError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
        finally:
            for w in caught:
                print(f"warning: {w.message}", file=sys.stderr)
    warning_list = [str(w.message) for w in caught]
    write_manifest(manifest_path, args.command, echo, inputs, outputs,
                   time.perf_counter() - t0, warning_list)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
