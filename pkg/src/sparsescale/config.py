"""Run configuration files.

INI-style key-value files read with :mod:`configparser`. Sections and keys::

    [grid]      n, domain_length (a number, or "2pi")
    [flow]      u0_amplitude, and one of reynolds / nu
    [time]      t_end, cfl_target, dt (optional), snapshot_stride, startup
    [measure]   lambda, connectivity, refine_depth, rays, seed
    [output]    directory

Missing keys take the desk defaults below. Every invalid entry is reported
together, each prefixed with ``section.key``.
"""

import configparser
import io
import math
from dataclasses import asdict, dataclass
from pathlib import Path

from .field import GridSpec
from .solver import STARTUP_MODES, SolverConfig

DESK_DEFAULTS = {
    "grid": {"n": "128", "domain_length": "2pi"},
    "flow": {"u0_amplitude": "0.01", "reynolds": "500"},
    "time": {"t_end": "350", "cfl_target": "0.5", "snapshot_stride": "10",
             "startup": "richardson"},
    "measure": {"lambda": "0.5", "connectivity": "26", "refine_depth": "3", "rays": "5",
                "seed": "0"},
    "output": {"directory": "run"},
}
KNOWN_KEYS = {sec: set(keys) for sec, keys in DESK_DEFAULTS.items()}
KNOWN_KEYS["flow"].add("nu")
KNOWN_KEYS["time"].add("dt")


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


@dataclass(frozen=True)
class MeasureConfig:
    lam: float = 0.5
    connectivity: int = 26
    refine_depth: int = 3
    rays: int = 5
    seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    solver: SolverConfig
    measure: MeasureConfig
    output_directory: str

    def echo(self):
        """Plain dict of every resolved value, for manifests."""
        s = self.solver
        return {
            "grid": {"n": s.grid.n, "domain_length": s.grid.domain_length},
            "flow": {"u0_amplitude": s.u0_amplitude, "nu": s.nu, "reynolds": s.reynolds},
            "time": {"t_end": s.t_end, "cfl_target": s.cfl_target, "dt": s.dt,
                     "snapshot_stride": s.snapshot_stride, "startup": s.startup},
            "measure": asdict(self.measure),
            "output": {"directory": self.output_directory},
        }


def _number(text):
    t = text.strip().lower().replace(" ", "")
    if t.endswith("pi"):
        head = t[:-2].rstrip("*")
        return (float(head) if head else 1.0) * math.pi
    return float(t)


class _Reader:
    def __init__(self, parser):
        self.parser = parser
        self.problems = []

    def raw(self, sec, key):
        if self.parser.has_option(sec, key):
            return self.parser.get(sec, key).strip()
        return DESK_DEFAULTS.get(sec, {}).get(key)

    def get(self, sec, key, kind, check=None, message=""):
        text = self.raw(sec, key)
        if text is None or text == "":
            return None
        try:
            value = _number(text) if kind is float else kind(text)
        except ValueError:
            self.problems.append(f"{sec}.{key}: cannot parse {text!r} as {kind.__name__}")
            return None
        if check is not None and not check(value):
            self.problems.append(f"{sec}.{key}: {message} (got {text})")
            return None
        return value


def parse_config(text, source="<string>"):
    """Build a :class:`RunConfig` from INI text; raises :class:`ConfigError`."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError([f"syntax: {exc}"]) from None
    rd = _Reader(parser)
    for sec in parser.sections():
        if sec not in KNOWN_KEYS:
            rd.problems.append(f"{sec}: unknown section")
            continue
        for key in parser.options(sec):
            if key not in KNOWN_KEYS[sec]:
                rd.problems.append(f"{sec}.{key}: unknown key")

    pos = lambda v: v > 0  # noqa: E731
    n = rd.get("grid", "n", int, lambda v: v >= 4 and v % 2 == 0, "must be an even integer >= 4")
    length = rd.get("grid", "domain_length", float, pos, "must be positive")
    u0 = rd.get("flow", "u0_amplitude", float, pos, "must be positive")
    nu = rd.get("flow", "nu", float, pos, "must be positive")
    given = {k for k in ("nu", "reynolds")
             if parser.has_option("flow", k) and parser.get("flow", k).strip()}
    if given == {"nu", "reynolds"}:
        rd.problems.append("flow.nu: give either nu or reynolds, not both")
    if nu is None and "nu" not in given:
        re_ = rd.get("flow", "reynolds", float, pos, "must be positive")
        if None not in (re_, u0, length):
            nu = u0 * length / re_
    t_end = rd.get("time", "t_end", float, pos, "must be positive")
    cfl = rd.get("time", "cfl_target", float, pos, "must be positive")
    dt = rd.get("time", "dt", float, pos, "must be positive")
    stride = rd.get("time", "snapshot_stride", int, pos, "must be a positive integer")
    startup = rd.get("time", "startup", str, lambda v: v in STARTUP_MODES,
                     f"must be one of {', '.join(STARTUP_MODES)}")
    lam = rd.get("measure", "lambda", float, lambda v: 0 < v < 1, "must lie in (0, 1)")
    conn = rd.get("measure", "connectivity", int, lambda v: v in (6, 18, 26),
                  "must be 6, 18 or 26")
    depth = rd.get("measure", "refine_depth", int, lambda v: v >= 0, "must be >= 0")
    rays = rd.get("measure", "rays", int, lambda v: v >= 1 and v % 2 == 1,
                  "must be a positive odd integer")
    seed = rd.get("measure", "seed", int, lambda v: v >= 0, "must be >= 0")
    directory = rd.raw("output", "directory")
    if rd.problems:
        raise ConfigError(rd.problems)
    solver = SolverConfig(GridSpec(n, length), nu, u0, t_end, dt, cfl, stride, startup)
    return RunConfig(solver, MeasureConfig(lam, conn, depth, rays, seed), directory)


def load_config(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"config file not found: {path}"])
    return parse_config(path.read_text(), str(path))


def default_config_text():
    """The desk defaults as an INI document."""
    parser = configparser.ConfigParser()
    parser.read_dict(DESK_DEFAULTS)
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()
