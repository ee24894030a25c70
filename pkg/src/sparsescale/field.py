"""Uniform periodic grids and spectral differential operators.

Arrays are indexed ``[ix, iy, iz]`` in memory; a vector field stacks its
components on a leading axis, shape ``(3, n, n, n)``. Linear voxel indices
and binary files use the x-fastest convention ``ix + n*iy + n*n*iz``.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft

from ._validation import check_finite, check_scalar_field, check_vector_field

_FFT_WORKERS = 1


def set_threads(workers):
    """Cap the worker count used by the FFT kernels.

    Results do not depend on this value: the transforms split work over
    independent one-dimensional lines only.
    """
    global _FFT_WORKERS
    _FFT_WORKERS = max(1, int(workers))


def get_threads():
    return _FFT_WORKERS


@dataclass(frozen=True)
class GridSpec:
    """Cubic periodic grid with ``n`` points per axis on ``[0, domain_length)``."""

    n: int
    domain_length: float = 2 * np.pi

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, (int, np.integer)):
            raise ValueError(f"n must be an integer, got {self.n!r}")
        if self.n < 4 or self.n % 2:
            raise ValueError(f"n must be an even integer >= 4, got {self.n}")
        if not np.isfinite(self.domain_length) or self.domain_length <= 0:
            raise ValueError(f"domain_length must be positive, got {self.domain_length!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "domain_length", float(self.domain_length))

    @property
    def spacing(self):
        return self.domain_length / self.n

    @property
    def shape(self):
        return (self.n, self.n, self.n)

    @property
    def spectral_shape(self):
        return (self.n, self.n, self.n // 2 + 1)

    @property
    def k0(self):
        """Fundamental wavenumber 2*pi/L."""
        return 2 * np.pi / self.domain_length

    def coordinates(self):
        """1-D array of grid point positions along any axis."""
        return np.arange(self.n) * self.spacing

    def mesh(self):
        """Open meshgrid ``(x, y, z)`` broadcastable to ``shape``."""
        x = self.coordinates()
        return x[:, None, None], x[None, :, None], x[None, None, :]

    @cached_property
    def wavenumbers(self):
        """Broadcastable ``(kx, ky, kz)`` for the real-to-complex layout."""
        k = scipy.fft.fftfreq(self.n, 1.0 / self.n) * self.k0
        kz = scipy.fft.rfftfreq(self.n, 1.0 / self.n) * self.k0
        return k[:, None, None], k[None, :, None], kz[None, None, :]

    @cached_property
    def derivative_wavenumbers(self):
        """Wavenumbers with the Nyquist mode zeroed, for odd derivatives."""
        kx, ky, kz = (k.copy() for k in self.wavenumbers)
        nyq = self.n // 2
        kx[nyq, 0, 0] = 0.0
        ky[0, nyq, 0] = 0.0
        kz[0, 0, nyq] = 0.0
        return kx, ky, kz

    @cached_property
    def k_squared(self):
        kx, ky, kz = self.wavenumbers
        return kx**2 + ky**2 + kz**2

    def linear_index(self, ix, iy, iz):
        """x-fastest linear index of grid point ``(ix, iy, iz)``."""
        n = self.n
        return np.asarray(ix) % n + n * (np.asarray(iy) % n) + n * n * (np.asarray(iz) % n)

    def unravel(self, index):
        """Inverse of :meth:`linear_index`; returns ``(ix, iy, iz)``."""
        index = np.asarray(index)
        n = self.n
        return index % n, (index // n) % n, index // (n * n)


def forward(values):
    """Real-to-complex transform over the last three axes."""
    return scipy.fft.rfftn(values, axes=(-3, -2, -1), workers=_FFT_WORKERS)


def inverse(values_hat, grid):
    """Complex-to-real inverse of :func:`forward`."""
    return scipy.fft.irfftn(values_hat, s=grid.shape, axes=(-3, -2, -1), workers=_FFT_WORKERS)


def transform_roundtrip(field, grid):
    """Forward then inverse transform; the identity up to round-off."""
    field = check_scalar_field(field, grid)
    return inverse(forward(field), grid)


def curl_hat(u_hat, grid):
    kx, ky, kz = grid.derivative_wavenumbers
    ux, uy, uz = u_hat
    return np.stack(
        [
            1j * (ky * uz - kz * uy),
            1j * (kz * ux - kx * uz),
            1j * (kx * uy - ky * ux),
        ]
    )


def curl(u, grid):
    """Vorticity ``curl u`` of a periodic velocity field, evaluated spectrally."""
    u = check_vector_field(u, grid)
    return inverse(curl_hat(forward(u), grid), grid)


def divergence_hat(u_hat, grid):
    kx, ky, kz = grid.derivative_wavenumbers
    return 1j * (kx * u_hat[0] + ky * u_hat[1] + kz * u_hat[2])


def divergence(u, grid):
    u = check_vector_field(u, grid)
    return inverse(divergence_hat(forward(u), grid), grid)


def gradient(s, grid):
    """Spectral gradient of a scalar field, shape ``(3, n, n, n)``."""
    s = check_scalar_field(s, grid)
    s_hat = forward(s)
    kx, ky, kz = grid.derivative_wavenumbers
    return inverse(np.stack([1j * kx * s_hat, 1j * ky * s_hat, 1j * kz * s_hat]), grid)


def max_norm(u):
    """Grid maximum of the pointwise norm ``max(|u_x|, |u_y|, |u_z|)``."""
    u = check_finite(u, "vector field")
    if u.size == 0:
        return 0.0
    return float(np.max(np.abs(u)))


def pointwise_max_norm(u):
    """Pointwise ``max(|u_x|, |u_y|, |u_z|)`` as a scalar field."""
    return np.max(np.abs(np.asarray(u, dtype=np.float64)), axis=0)


def kinetic_energy(u, grid):
    """``0.5 * integral |u|^2`` over the periodic box."""
    u = np.asarray(u, dtype=np.float64)
    return 0.5 * float(np.sum(u * u)) * grid.spacing**3


def kinetic_energy_hat(u_hat, grid):
    """Kinetic energy from real-to-complex coefficients (Parseval)."""
    n = grid.n
    weight = np.full(grid.spectral_shape[-1], 2.0)
    weight[0] = 1.0
    if n % 2 == 0:
        weight[-1] = 1.0
    power = np.sum(np.abs(u_hat) ** 2, axis=(0, 1, 2)) @ weight
    return 0.5 * float(power) / n**3 * grid.domain_length**3 / n**3
