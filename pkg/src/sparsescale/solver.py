"""Unforced incompressible Navier-Stokes on the periodic box.

Fourier pseudospectral discretization with a Leray projection in place of
the pressure, a 2/3-rule spherical truncation of the convective product and
IMEX time stepping: third-order Adams-Bashforth on the projected convective
term, third-order Adams-Moulton on the diagonal diffusion term.
"""

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._validation import check_positive, check_vector_field
from .field import (
    GridSpec,
    curl_hat,
    forward,
    inverse,
    kinetic_energy_hat,
)
from .snapshot import VELOCITY_NAMES, VORTICITY_NAMES, FieldSnapshot

logger = logging.getLogger(__name__)

STARTUP_MODES = ("richardson", "plain")


class InstabilityError(RuntimeError):
    """Raised when a step produces non-finite values."""


@dataclass(frozen=True)
class SolverConfig:
    """Run configuration. The external forcing is fixed to zero.

    Exactly one of ``dt`` and ``cfl_target`` drives the step size: an explicit
    ``dt`` wins, otherwise ``dt = cfl_target * spacing / max|u0|``. Either way
    the step is then shrunk so that ``t_end`` is hit exactly.
    """

    grid: GridSpec
    nu: float
    u0_amplitude: float = 0.01
    t_end: float = 1.0
    dt: float | None = None
    cfl_target: float = 0.5
    snapshot_stride: int = 10
    startup: str = "richardson"

    def __post_init__(self):
        check_positive(self.nu, "nu")
        check_positive(self.u0_amplitude, "u0_amplitude")
        check_positive(self.t_end, "t_end")
        if self.dt is not None:
            check_positive(self.dt, "dt")
        check_positive(self.cfl_target, "cfl_target")
        if not isinstance(self.snapshot_stride, int) or self.snapshot_stride < 1:
            raise ValueError(f"snapshot_stride must be a positive integer, got {self.snapshot_stride!r}")
        if self.startup not in STARTUP_MODES:
            raise ValueError(f"startup must be one of {STARTUP_MODES}, got {self.startup!r}")

    @property
    def reynolds(self):
        return self.u0_amplitude * self.grid.domain_length / self.nu

    def time_step(self, u0):
        """Return ``(dt, n_steps)`` for initial velocity ``u0``."""
        if self.dt is not None:
            dt = self.dt
        else:
            speed = float(np.sqrt(np.max(np.sum(np.asarray(u0) ** 2, axis=0))))
            if speed == 0.0:
                dt = self.t_end
            else:
                dt = self.cfl_target * self.grid.spacing / speed
        n_steps = max(1, math.ceil(self.t_end / dt - 1e-9))
        return self.t_end / n_steps, n_steps


@dataclass
class SolverState:
    """Spectral velocity plus the history needed by the multistep scheme.

    ``history`` holds the projected convective terms of the previous steps,
    newest first, at most two of them. ``velocity_hat_prev`` is the velocity
    one step back, which the Adams-Moulton diffusion update also needs.
    """

    time: float
    velocity_hat: np.ndarray
    history: tuple = ()
    velocity_hat_prev: np.ndarray | None = None
    step_index: int = 0


def kida_initial_condition(grid, u0_amplitude=0.01):
    """Sample the Kida vortex velocity on ``grid``.

    ``u_x = U0 sin x (cos 3y cos z - cos y cos 3z)`` and the cyclic
    permutations ``(x, y, z) -> (y, z, x)`` for ``u_y`` and ``u_z``.
    """
    x, y, z = grid.mesh()

    def component(a, b, c):
        return u0_amplitude * np.sin(a) * (np.cos(3 * b) * np.cos(c) - np.cos(b) * np.cos(3 * c))

    shape = grid.shape
    return np.stack([
        np.broadcast_to(component(x, y, z), shape),
        np.broadcast_to(component(y, z, x), shape),
        np.broadcast_to(component(z, x, y), shape),
    ]).astype(np.float64)


def dealias_mask(grid):
    """Spherical 2/3-rule mask: keep modes with ``|k|/k0 < n/3``."""
    kmag = np.sqrt(grid.k_squared) / grid.k0
    return kmag < grid.n / 3.0


def project_hat(u_hat, grid):
    kx, ky, kz = grid.derivative_wavenumbers
    kk = kx**2 + ky**2 + kz**2
    kk = np.where(kk == 0.0, 1.0, kk)
    k_dot_u = (kx * u_hat[0] + ky * u_hat[1] + kz * u_hat[2]) / kk
    return np.stack([u_hat[0] - kx * k_dot_u, u_hat[1] - ky * k_dot_u, u_hat[2] - kz * k_dot_u])


def leray_project(u, grid):
    """Divergence-free part of ``u``; the mean mode is left untouched."""
    u = check_vector_field(u, grid)
    return inverse(project_hat(forward(u), grid), grid)


def _convective_hat(u_hat, grid, mask):
    """Projected, truncated ``-(u.grad)u`` and the velocity gradient tensor.

    ``grads[j, i]`` is ``d u_i / d x_j`` in physical space.
    """
    kd = grid.derivative_wavenumbers
    stack = np.empty((12,) + u_hat.shape[1:], dtype=complex)
    stack[:3] = u_hat
    for j, k in enumerate(kd):
        stack[3 + 3 * j: 6 + 3 * j] = 1j * k * u_hat
    phys = inverse(stack, grid)
    u = phys[:3]
    grads = phys[3:].reshape((3, 3) + grid.shape)
    adv = u[0] * grads[0] + u[1] * grads[1] + u[2] * grads[2]
    n_hat = forward(adv)
    n_hat *= -mask.astype(np.float64)
    return project_hat(n_hat, grid), grads


def nonlinear_term(u, grid):
    """Dealiased, projected ``-(u.grad)u`` in physical space."""
    u = check_vector_field(u, grid)
    n_hat, _ = _convective_hat(forward(u), grid, dealias_mask(grid))
    return inverse(n_hat, grid)


def vorticity_max_from_gradients(grads):
    wx = grads[1, 2] - grads[2, 1]
    wy = grads[2, 0] - grads[0, 2]
    wz = grads[0, 1] - grads[1, 0]
    return float(max(np.max(np.abs(wx)), np.max(np.abs(wy)), np.max(np.abs(wz))))


def divergence_residual(u_hat, grid):
    """``max_k |k.u(k)| / (max|k| * max|u(k)|)``, a dimensionless residual."""
    kx, ky, kz = grid.derivative_wavenumbers
    kdu = np.abs(kx * u_hat[0] + ky * u_hat[1] + kz * u_hat[2])
    scale = np.sqrt(np.max(grid.k_squared)) * np.max(np.abs(u_hat))
    return float(np.max(kdu) / scale) if scale > 0 else 0.0


def initial_state(u0, grid):
    u0 = check_vector_field(u0, grid)
    return SolverState(time=0.0, velocity_hat=project_hat(forward(u0), grid))


class _Stepper:
    """Precomputed operators for one grid, viscosity and step size."""

    def __init__(self, grid, nu, dt, startup="richardson", nonlinear=True):
        self.grid = grid
        self.dt = dt
        self.startup = startup
        self.nonlinear = nonlinear
        self.mask = dealias_mask(grid)
        self.lin = -nu * grid.k_squared

    def convective(self, u_hat):
        if self.nonlinear:
            return _convective_hat(u_hat, self.grid, self.mask)
        grads = None
        return np.zeros_like(u_hat), grads

    def _imex1(self, u_hat, n_hat, dt):
        return (u_hat + dt * n_hat) / (1.0 - dt * self.lin)

    def advance(self, state):
        """One step; returns ``(new_state, grads_at_old_time)``."""
        dt, lin = self.dt, self.lin
        u = state.velocity_hat
        n_now, grads = self.convective(u)
        k = state.step_index
        if k == 0:
            if self.startup == "richardson":
                full = self._imex1(u, n_now, dt)
                half = self._imex1(u, n_now, 0.5 * dt)
                n_half, _ = self.convective(half)
                half = self._imex1(half, n_half, 0.5 * dt)
                new = 2.0 * half - full
            else:
                new = self._imex1(u, n_now, dt)
        elif k == 1:
            n1 = state.history[0]
            rhs = u * (1.0 + 0.5 * dt * lin) + dt * (1.5 * n_now - 0.5 * n1)
            new = rhs / (1.0 - 0.5 * dt * lin)
        else:
            n1, n2 = state.history
            rhs = (u * (1.0 + (8.0 / 12.0) * dt * lin)
                   - (1.0 / 12.0) * dt * lin * state.velocity_hat_prev
                   + dt * ((23.0 / 12.0) * n_now - (16.0 / 12.0) * n1 + (5.0 / 12.0) * n2))
            new = rhs / (1.0 - (5.0 / 12.0) * dt * lin)
        if not np.all(np.isfinite(new)):
            wmax = vorticity_max_from_gradients(grads) if grads is not None else float("nan")
            raise InstabilityError(
                f"blow-up or instability detected at t={state.time:.6g} "
                f"(dt={dt:.6g}, |omega|_inf={wmax:.6g})"
            )
        history = (n_now,) + tuple(state.history[:1])
        new_state = SolverState(
            time=state.time + dt,
            velocity_hat=new,
            history=history,
            velocity_hat_prev=u,
            step_index=k + 1,
        )
        return new_state, grads


def step(state, config, dt=None, nonlinear=True):
    """Advance ``state`` by one IMEX step.

    Step 0 uses the first-order IMEX scheme (Richardson-extrapolated over two
    half steps unless ``config.startup == "plain"``), step 1 the second-order
    scheme, later steps the third-order one. ``nonlinear=False`` drops the
    convective term, leaving pure diffusion.
    """
    if dt is None:
        dt = config.dt
    if dt is None:
        raise ValueError("step needs an explicit dt (config.dt or the dt argument)")
    stepper = _Stepper(config.grid, config.nu, dt, config.startup, nonlinear)
    new_state, _ = stepper.advance(state)
    return new_state


@dataclass
class SimulationResult:
    config: SolverConfig
    dt: float
    n_steps: int
    steps: np.ndarray
    times: np.ndarray
    omega_max: np.ndarray
    energy: np.ndarray
    divergence: np.ndarray
    snapshots: list = field(default_factory=list)
    final_state: SolverState | None = None

    @property
    def reynolds(self):
        return self.config.reynolds


def make_snapshot(state, config, with_vorticity=True):
    grid = config.grid
    u = inverse(state.velocity_hat, grid)
    fields = dict(zip(VELOCITY_NAMES, u))
    if with_vorticity:
        fields.update(zip(VORTICITY_NAMES, inverse(curl_hat(state.velocity_hat, grid), grid)))
    return FieldSnapshot(grid, float(state.time), config.nu, fields, step=state.step_index)


def simulate(config, initial_velocity=None, on_snapshot=None, keep_snapshots=True):
    """Integrate from the Kida initial condition (or ``initial_velocity``) to ``t_end``.

    Snapshots (velocity plus vorticity derived by a spectral curl) are taken at
    step 0, every ``snapshot_stride`` steps and at the final step. Each one is
    passed to ``on_snapshot(index, snapshot)`` if given, and collected in the
    result unless ``keep_snapshots`` is false. ``|omega|_inf``, kinetic energy
    and the divergence residual are recorded at every step.
    """
    grid = config.grid
    if initial_velocity is None:
        initial_velocity = kida_initial_condition(grid, config.u0_amplitude)
    state = initial_state(initial_velocity, grid)
    dt, n_steps = config.time_step(initial_velocity)
    stepper = _Stepper(grid, config.nu, dt, config.startup)
    logger.info("simulate: n=%d Re=%.4g dt=%.6g steps=%d", grid.n, config.reynolds, dt, n_steps)

    steps, times, wmax, energy, div = [], [], [], [], []
    snapshots = []
    snap_index = 0

    def emit(st):
        nonlocal snap_index
        snap = make_snapshot(st, config)
        if on_snapshot is not None:
            on_snapshot(snap_index, snap)
        if keep_snapshots:
            snapshots.append(snap)
        snap_index += 1

    for k in range(n_steps):
        if k % config.snapshot_stride == 0:
            emit(state)
        new_state, grads = stepper.advance(state)
        new_state.time = (k + 1) * dt
        steps.append(k)
        times.append(state.time)
        wmax.append(vorticity_max_from_gradients(grads))
        energy.append(kinetic_energy_hat(state.velocity_hat, grid))
        div.append(divergence_residual(state.velocity_hat, grid))
        state = new_state

    omega_final = inverse(curl_hat(state.velocity_hat, grid), grid)
    steps.append(n_steps)
    times.append(state.time)
    wmax.append(float(np.max(np.abs(omega_final))))
    energy.append(kinetic_energy_hat(state.velocity_hat, grid))
    div.append(divergence_residual(state.velocity_hat, grid))
    emit(state)

    return SimulationResult(
        config=config,
        dt=dt,
        n_steps=n_steps,
        steps=np.asarray(steps),
        times=np.asarray(times),
        omega_max=np.asarray(wmax),
        energy=np.asarray(energy),
        divergence=np.asarray(div),
        snapshots=snapshots,
        final_state=state,
    )


def with_grid(config, n):
    return replace(config, grid=GridSpec(n, config.grid.domain_length))
