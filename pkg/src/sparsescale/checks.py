"""Small-size oracle cross-checks run by ``sparsescale validate``.

Each check compares a production routine against an independent route
(Monte Carlo, brute force, exhaustive search, closed-form solution) and
reports measured against expected values.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .field import GridSpec, inverse, kinetic_energy
from .geometry import (
    AabbTree,
    brute_force_distance,
    extract_isosurface,
    max_inscribed_radius,
    max_radius_over_rivs,
    voxel_distance_oracle,
)
from .levelsets import ZAlphaParams, connected_components, sparseness_ratio, z_alpha_check
from .solver import SolverConfig, simulate
from .synthetic import ball_field, blob_field, halfspace_mask, taylor_green

FAULTS = ("pruning",)


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        parts = [f"{k}={_fmt(v)}" for k, v in self.measured.items()]
        want = [f"{k} {v}" for k, v in self.expected.items()]
        return f"[{status}] {self.name}: {', '.join(parts)} (expected {'; '.join(want)})"

    def to_dict(self):
        return {"name": self.name, "passed": self.passed, "measured": self.measured,
                "expected": self.expected}


def _fmt(v):
    return f"{v:.6g}" if isinstance(v, float) else str(v)


def monte_carlo_ratio(mask, grid, x0, r, samples, seed=0):
    """Fraction of uniform samples in ``B(x0, r)`` whose voxel is in ``mask``."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((samples, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    p = x0 + v * (r * rng.random(samples) ** (1 / 3))[:, None]
    idx = np.rint(p / grid.spacing).astype(np.int64) % grid.n
    return float(np.mean(mask[idx[:, 0], idx[:, 1], idx[:, 2]]))


def check_sparseness(fault=None):
    g = GridSpec(64)
    h = g.spacing
    mask = ball_field(g, 1.0) > 0
    x0 = np.array([np.pi + 0.6, np.pi - 0.2, np.pi + 0.1])
    got = sparseness_ratio(mask, g, x0, 0.8)
    mc = monte_carlo_ratio(mask, g, x0, 0.8, 200_000)
    # plane on a voxel face, ball centered on it: exactly half
    plane = (32 + 0.5) * h
    half = sparseness_ratio(halfspace_mask(g, (1, 0, 0), plane), g, (plane, np.pi, np.pi), 1.0)
    ok = abs(got - mc) <= 0.01 and abs(half - 0.5) <= 0.01
    return CheckResult("sparseness", ok, {"ratio": got, "monte_carlo": mc, "half_space": half},
                       {"ratio": "within 0.01 of monte_carlo", "half_space": "0.5 +- 0.01"})


def check_distance(fault=None):
    g = GridSpec(32)
    mesh = extract_isosurface(ball_field(g, 1.2), g, 0.0)
    tree = AabbTree(mesh)
    pts = np.random.default_rng(1).uniform(0.0, g.domain_length, (1000, 3))
    err = float(np.max(np.abs(tree.distances(pts) - brute_force_distance(mesh, pts))))
    return CheckResult("distance", err <= 1e-12, {"max_abs_diff": err, "triangles": len(mesh)},
                       {"max_abs_diff": "<= 1e-12"})


def check_inscribed(fault=None):
    g = GridSpec(64)
    s = ball_field(g, 0.5, center=(np.pi + 0.013, np.pi - 0.021, np.pi + 0.007))
    riv = connected_components(s > 0)[0]
    r = max_inscribed_radius(riv, s, g, level=0.0).radius
    oracle = float(voxel_distance_oracle(s > 0, g).max())
    ok = abs(r - 0.5) <= g.spacing and abs(r - oracle) <= g.spacing
    return CheckResult("inscribed", ok, {"radius": r, "oracle": oracle, "spacing": g.spacing},
                       {"radius": "0.5 +- spacing", "oracle": "radius +- spacing"})


def check_pruning(fault=None, seeds=range(5)):
    g = GridSpec(32)
    bound = (lambda riv: -1.0) if fault == "pruning" else None
    mismatches = []
    for seed in seeds:
        s = blob_field(g, seed)
        level = 0.5 * float(s.max())
        rivs = connected_components(s > level, threshold=level)
        pruned = max_radius_over_rivs(rivs, s, g, prune=True, bound=bound)
        full = max_radius_over_rivs(rivs, s, g, prune=False)
        if pruned.radius != full.radius:
            mismatches.append((seed, pruned.radius, full.radius))
    measured = {"fields": len(list(seeds)), "mismatches": len(mismatches)}
    if mismatches:
        seed, a, b = mismatches[0]
        measured.update(first_seed=seed, pruned=a, exhaustive=b)
    return CheckResult("pruning", not mismatches, measured, {"mismatches": "0"})


def taylor_green_error(n, dt, nu=0.01, t_end=1.0):
    g = GridSpec(n)
    cfg = SolverConfig(g, nu=nu, t_end=t_end, dt=dt, snapshot_stride=10**9)
    res = simulate(cfg, initial_velocity=taylor_green(g, nu), keep_snapshots=False)
    u = inverse(res.final_state.velocity_hat, g)
    return float(np.max(np.abs(u - taylor_green(g, nu, t_end))))


def check_taylor_green(fault=None):
    e1 = taylor_green_error(16, 0.05)
    e2 = taylor_green_error(16, 0.025)
    ratio = e1 / e2
    ok = e1 < 1e-6 and 6 <= ratio <= 10
    return CheckResult("taylor_green", ok, {"error": e1, "error_half_dt": e2, "ratio": ratio},
                       {"error": "< 1e-6", "ratio": "in [6, 10]"})


def check_kida(fault=None):
    g = GridSpec(32)
    cfg = SolverConfig(g, nu=0.01 * g.domain_length / 500, u0_amplitude=0.01, t_end=60.0,
                       snapshot_stride=10**9)
    res = simulate(cfg, keep_snapshots=False)
    e = res.energy
    rise = float(np.max(np.diff(e)) / e[0])
    u = inverse(res.final_state.velocity_hat, g)
    scale = float(np.max(np.abs(u)))
    sym = max(float(np.max(np.abs(u[1] - u[0].transpose(2, 0, 1)))),
              float(np.max(np.abs(u[2] - u[1].transpose(2, 0, 1))))) / scale
    div = float(np.max(res.divergence))
    ok = rise <= 1e-12 and div < 1e-12 and sym < 1e-8
    return CheckResult("kida", ok, {"energy_rise": rise, "divergence": div, "symmetry": sym,
                                    "energy_final": kinetic_energy(u, g)},
                       {"energy_rise": "<= 1e-12", "divergence": "< 1e-12",
                        "symmetry": "< 1e-8"})


def check_z_alpha(fault=None):
    g = GridSpec(32)
    params = ZAlphaParams(lam=0.5, delta=0.5, c0=2.0, alpha=0.5)
    # unit max-norm, so the largest admissible scale is c0
    critical = params.c0 * params.delta ** (1 / 3)
    wrong = []
    for rho in (critical - 2 * g.spacing, critical + 2 * g.spacing):
        f = np.zeros((3,) + g.shape)
        f[0] = ball_field(g, rho) > 0
        verdict = z_alpha_check(f, g, params).verdict
        if verdict != (rho < critical):
            wrong.append(rho)
    return CheckResult("z_alpha", not wrong, {"critical_radius": critical, "wrong": len(wrong)},
                       {"wrong": "0"})


CHECKS = {
    "sparseness": check_sparseness,
    "distance": check_distance,
    "inscribed": check_inscribed,
    "pruning": check_pruning,
    "taylor_green": check_taylor_green,
    "kida": check_kida,
    "z_alpha": check_z_alpha,
}


def run_checks(only=None, fault=None):
    names = list(CHECKS) if not only else list(only)
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise ValueError(f"unknown check(s): {', '.join(unknown)}; choose from {', '.join(CHECKS)}")
    if fault is not None and fault not in FAULTS:
        raise ValueError(f"unknown fault {fault!r}; choose from {', '.join(FAULTS)}")
    results = []
    for name in names:
        t0 = time.perf_counter()
        res = CHECKS[name](fault)
        res.seconds = time.perf_counter() - t0
        results.append(res)
    return results
