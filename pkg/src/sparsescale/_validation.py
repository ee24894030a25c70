"""Input validation helpers shared by the public functions and estimators."""

import numbers

import numpy as np


def check_finite(values, name="field"):
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        bad = np.count_nonzero(~np.isfinite(values))
        raise ValueError(f"{name} contains {bad} non-finite value(s)")
    return values


def check_scalar_field(s, grid, name="field"):
    """Return ``s`` as a finite float64 array of shape ``grid.shape``."""
    s = check_finite(s, name)
    if s.shape != grid.shape:
        raise ValueError(f"{name} has shape {s.shape}, expected {grid.shape}")
    return s


def check_vector_field(u, grid, name="vector field"):
    """Return ``u`` as a finite float64 array of shape ``(3,) + grid.shape``."""
    u = check_finite(u, name)
    if u.shape != (3,) + grid.shape:
        raise ValueError(f"{name} has shape {u.shape}, expected {(3,) + grid.shape}")
    return u


def check_mask(mask, grid, name="mask"):
    mask = np.asarray(mask)
    if mask.shape != grid.shape:
        raise ValueError(f"{name} has shape {mask.shape}, expected {grid.shape}")
    return mask.astype(bool, copy=False)


def check_positive(value, name, allow_zero=False):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ValueError(f"{name} must be {bound}, got {value!r}")
    return float(value)


def check_fraction(value, name):
    """Open unit interval check used for level and sparseness fractions."""
    if not isinstance(value, numbers.Real) or not 0.0 < value < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {value!r}")
    return float(value)


def check_point(p, name="point"):
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (3,) or not np.all(np.isfinite(p)):
        raise ValueError(f"{name} must be a finite 3-vector, got {p!r}")
    return p
