import numpy as np
import pytest

from sparsescale.field import GridSpec, divergence, forward, inverse, kinetic_energy
from sparsescale.solver import (
    InstabilityError,
    SolverConfig,
    dealias_mask,
    initial_state,
    kida_initial_condition,
    leray_project,
    make_snapshot,
    nonlinear_term,
    simulate,
    step,
    with_grid,
)
from sparsescale.synthetic import taylor_green


def test_leray_removes_gradient(grid16):
    x, y, z = grid16.mesh()
    grad = np.stack(np.broadcast_arrays(np.cos(x) + 0 * y, 0 * x + np.sin(2 * y), 0 * z + 0 * x))
    assert np.max(np.abs(leray_project(grad, grid16))) < 1e-13


def test_leray_keeps_solenoidal(grid16):
    u = taylor_green(grid16, 0.0)
    assert np.max(np.abs(leray_project(u, grid16) - u)) < 1e-13


def test_leray_output_is_divergence_free(grid16, rng):
    u = leray_project(rng.standard_normal((3,) + grid16.shape), grid16)
    assert np.max(np.abs(divergence(u, grid16))) < 1e-11


def test_leray_is_idempotent(grid16, rng):
    p = leray_project(rng.standard_normal((3,) + grid16.shape), grid16)
    assert np.max(np.abs(leray_project(p, grid16) - p)) < 1e-13


def test_dealias_mask_two_thirds():
    g = GridSpec(12)
    m = dealias_mask(g)
    k = np.sqrt(g.k_squared) / g.k0
    assert m[k < 4].all() and not m[k >= 4].any()


def test_nonlinear_taylor_green_is_zero(grid16):
    # the convective term of Taylor-Green is a pure gradient
    assert np.max(np.abs(nonlinear_term(taylor_green(grid16, 0.0), grid16))) < 1e-13


def test_nonlinear_zero_field(grid16):
    assert np.all(nonlinear_term(np.zeros((3,) + grid16.shape), grid16) == 0)


def _low_modes(field_hat, kmax):
    return field_hat[..., :kmax, :kmax, :kmax]


def test_nonlinear_resolution_independent_for_kida():
    # Kida modes reach |k| = sqrt(11); products stay below 2/3 of n=32's cutoff
    coarse, fine = GridSpec(32), GridSpec(64)
    a = forward(nonlinear_term(kida_initial_condition(coarse, 1.0), coarse)) / 32**3
    b = forward(nonlinear_term(kida_initial_condition(fine, 1.0), fine)) / 64**3
    assert np.max(np.abs(_low_modes(a, 8) - _low_modes(b, 8))) < 1e-10


def test_single_mode_decays_exactly_without_nonlinearity():
    g = GridSpec(16)
    nu, dt = 0.05, 0.01
    u = taylor_green(g, 0.0)
    cfg = SolverConfig(g, nu=nu, t_end=0.2, dt=dt)
    state = initial_state(u, g)
    for _ in range(20):
        state = step(state, cfg, nonlinear=False)
    got = inverse(state.velocity_hat, g)
    assert state.time == pytest.approx(0.2)
    assert np.max(np.abs(got - taylor_green(g, nu, 0.2))) < 1e-8


def test_zero_field_stays_zero():
    g = GridSpec(8)
    cfg = SolverConfig(g, nu=0.1, t_end=0.5, dt=0.1)
    res = simulate(cfg, initial_velocity=np.zeros((3,) + g.shape))
    assert np.all(res.final_state.velocity_hat == 0)
    assert np.all(res.omega_max == 0)


def test_step_requires_dt(grid16):
    cfg = SolverConfig(grid16, nu=0.1)
    with pytest.raises(ValueError, match="dt"):
        step(initial_state(taylor_green(grid16, 0.1), grid16), cfg)


@pytest.mark.parametrize("kwargs, match", [
    ({"nu": 0.0}, "nu"),
    ({"nu": 0.1, "t_end": -1}, "t_end"),
    ({"nu": 0.1, "snapshot_stride": 0}, "snapshot_stride"),
    ({"nu": 0.1, "startup": "euler"}, "startup"),
])
def test_config_validation(grid16, kwargs, match):
    with pytest.raises(ValueError, match=match):
        SolverConfig(grid16, **kwargs)


def test_time_step_hits_t_end(grid16):
    cfg = SolverConfig(grid16, nu=0.1, t_end=1.0, cfl_target=0.5)
    dt, n = cfg.time_step(taylor_green(grid16, 0.1))
    assert n * dt == pytest.approx(1.0, rel=1e-14)
    assert dt <= 0.5 * grid16.spacing / 1.0 + 1e-15


def test_simulate_snapshots_and_diagnostics():
    g = GridSpec(16)
    cfg = SolverConfig(g, nu=0.05, u0_amplitude=1.0, t_end=0.5, dt=0.05, snapshot_stride=4)
    res = simulate(cfg)
    assert res.n_steps == 10
    assert [s.step for s in res.snapshots] == [0, 4, 8, 10]
    assert res.times[-1] == pytest.approx(0.5)
    assert len(res.omega_max) == res.n_steps + 1
    assert np.all(np.diff(res.energy) <= 0)
    assert res.reynolds == pytest.approx(2 * np.pi / 0.05)
    # reported |omega| at t=0 equals the max-norm of the spectral curl
    assert res.omega_max[0] == pytest.approx(np.max(np.abs(res.snapshots[0].vorticity)), rel=1e-12)


def test_simulate_on_snapshot_callback():
    g = GridSpec(8)
    seen = []
    cfg = SolverConfig(g, nu=0.1, u0_amplitude=1.0, t_end=0.3, dt=0.1, snapshot_stride=2)
    res = simulate(cfg, on_snapshot=lambda i, s: seen.append((i, s.step)), keep_snapshots=False)
    assert seen == [(0, 0), (1, 2), (2, 3)]
    assert res.snapshots == []


def test_make_snapshot_fields(grid16):
    cfg = SolverConfig(grid16, nu=0.1)
    snap = make_snapshot(initial_state(taylor_green(grid16, 0.1), grid16), cfg)
    assert set(snap.fields) == {"u_x", "u_y", "u_z", "omega_x", "omega_y", "omega_z"}


def test_instability_detected():
    g = GridSpec(16)
    cfg = SolverConfig(g, nu=1e-6, u0_amplitude=1.0, t_end=200.0, dt=2.0)
    with pytest.raises(InstabilityError, match="blow-up or instability detected at t="):
        with np.errstate(all="ignore"):
            simulate(cfg, keep_snapshots=False)


def test_richardson_startup_beats_plain():
    g = GridSpec(16)
    errs = {}
    for mode in ("plain", "richardson"):
        cfg = SolverConfig(g, nu=0.01, t_end=1.0, dt=0.05, startup=mode)
        res = simulate(cfg, initial_velocity=taylor_green(g, 0.01), keep_snapshots=False)
        errs[mode] = np.max(np.abs(inverse(res.final_state.velocity_hat, g)
                                   - taylor_green(g, 0.01, 1.0)))
    assert errs["richardson"] < errs["plain"] / 10


def test_with_grid():
    cfg = SolverConfig(GridSpec(16), nu=0.1)
    assert with_grid(cfg, 8).grid.n == 8


def test_kida_energy_matches_formula():
    g = GridSpec(32)
    u = kida_initial_condition(g, 1.0)
    # each component averages U0^2 * (1/2) * (1/4 + 1/4) over the box
    assert kinetic_energy(u, g) == pytest.approx(0.5 * 3 * 0.25 * (2 * np.pi) ** 3, rel=1e-12)
