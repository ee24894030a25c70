"""Analytic fields with known geometry, used by the oracle checks.

Scalar shape fields are positive inside the shape and roughly a signed
distance near its boundary, so the super-level set at 0 is the shape itself
and its largest inscribed sphere is known in closed form.
"""

import numpy as np


def periodic_offsets(grid, center):
    """Minimum-image offsets ``x - center`` on each axis (open mesh arrays)."""
    L = grid.domain_length
    out = []
    for coord, c in zip(grid.mesh(), center):
        d = coord - c
        out.append(d - L * np.round(d / L))
    return out


def box_center(grid):
    return np.full(3, grid.domain_length / 2)


def ball_field(grid, radius, center=None):
    """``radius - |x - center|`` (periodic)."""
    center = box_center(grid) if center is None else np.asarray(center, dtype=np.float64)
    dx, dy, dz = periodic_offsets(grid, center)
    return radius - np.sqrt(dx * dx + dy * dy + dz * dz)


def box_field(grid, half_widths, center=None):
    """``min_a (half_width_a - |x_a - center_a|)``; inscribed radius is the
    smallest half-width."""
    center = box_center(grid) if center is None else np.asarray(center, dtype=np.float64)
    offs = periodic_offsets(grid, center)
    parts = [hw - np.abs(d) for hw, d in zip(half_widths, offs)]
    return np.minimum(np.minimum(parts[0], parts[1]), parts[2])


def torus_field(grid, major, minor, center=None):
    """``minor - distance to the core circle`` for a torus in the xy-plane."""
    center = box_center(grid) if center is None else np.asarray(center, dtype=np.float64)
    dx, dy, dz = periodic_offsets(grid, center)
    rho = np.sqrt(dx * dx + dy * dy)
    return minor - np.sqrt((rho - major) ** 2 + dz * dz)


def blob_field(grid, seed, n_blobs=6, width=(0.15, 0.45)):
    """Sum of periodic Gaussian bumps with seeded centers, widths and weights."""
    rng = np.random.default_rng(seed)
    L = grid.domain_length
    s = np.zeros(grid.shape)
    for _ in range(n_blobs):
        c = rng.uniform(0.0, L, 3)
        w = rng.uniform(*width)
        a = rng.uniform(0.5, 1.0)
        dx, dy, dz = periodic_offsets(grid, c)
        s += a * np.exp(-(dx * dx + dy * dy + dz * dz) / (2 * w * w))
    return s


def halfspace_mask(grid, normal, offset):
    """``{x : normal . x > offset}`` (not periodic-continued; unwrapped coordinates)."""
    x, y, z = grid.mesh()
    return normal[0] * x + normal[1] * y + normal[2] * z > offset


def slab_mask(grid, axis, lo, hi):
    coord = grid.mesh()[axis]
    mask = (coord > lo) & (coord < hi)
    return np.broadcast_to(mask, grid.shape).copy()


def taylor_green(grid, nu, t=0.0, amplitude=1.0):
    """Embedded 2D Taylor-Green vortex, an exact decaying solution.

    ``u = A sin x cos y e^{-2 nu t}``, ``v = -A cos x sin y e^{-2 nu t}``,
    ``w = 0``; its convective term is a pure gradient.
    """
    x, y, _ = grid.mesh()
    f = amplitude * np.exp(-2.0 * nu * t)
    u = f * np.sin(x) * np.cos(y)
    v = -f * np.cos(x) * np.sin(y)
    return np.stack([np.broadcast_to(u, grid.shape), np.broadcast_to(v, grid.shape),
                     np.zeros(grid.shape)]).astype(np.float64)


def kida_vorticity_exact(x, y, z, u0=1.0):
    """Closed-form curl of the Kida initial velocity at given points."""
    def d_comp(a, b, c):
        # partial derivatives of U0 sin a (cos 3b cos c - cos b cos 3c)
        da = u0 * np.cos(a) * (np.cos(3 * b) * np.cos(c) - np.cos(b) * np.cos(3 * c))
        db = u0 * np.sin(a) * (-3 * np.sin(3 * b) * np.cos(c) + np.sin(b) * np.cos(3 * c))
        dc = u0 * np.sin(a) * (-np.cos(3 * b) * np.sin(c) + 3 * np.cos(b) * np.sin(3 * c))
        return da, db, dc

    # u_x(x,y,z), u_y = comp(y,z,x), u_z = comp(z,x,y)
    _, dux_dy, dux_dz = d_comp(x, y, z)
    duy_dy, duy_dz, duy_dx = d_comp(y, z, x)
    duz_dz, duz_dx, duz_dy = d_comp(z, x, y)
    return np.stack([duz_dy - duy_dz, dux_dz - duz_dx, duy_dx - dux_dy])

