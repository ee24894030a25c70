"""Component super-level sets, periodic RIV labeling and 3D sparseness."""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ._validation import (
    check_fraction,
    check_mask,
    check_point,
    check_positive,
    check_vector_field,
)
from .field import forward, inverse, max_norm

COMPONENT_NAMES = ("1+", "1-", "2+", "2-", "3+", "3-")
SUBCELLS = 4


def component_parts(f, grid=None):
    """Positive parts and negated negative parts of the three components.

    Returns an array of shape ``(6, n, n, n)`` ordered
    ``f1+, f1-, f2+, f2-, f3+, f3-`` (see :data:`COMPONENT_NAMES`).
    """
    f = np.asarray(f, dtype=np.float64)
    if grid is not None:
        f = check_vector_field(f, grid)
    parts = np.empty((6,) + f.shape[1:])
    for i in range(3):
        parts[2 * i] = np.maximum(f[i], 0.0)
        parts[2 * i + 1] = np.maximum(-f[i], 0.0)
    return parts


def superlevel_mask(s, cut):
    """Boolean mask of ``s > cut``."""
    if not np.isfinite(cut) or cut < 0:
        raise ValueError(f"cut must be finite and >= 0, got {cut!r}")
    return np.asarray(s) > cut


@dataclass
class Riv:
    """One periodic-connected component of a super-level mask.

    ``voxels`` are x-fastest linear indices in increasing order. The bounding
    box is periodic: on each axis it starts at ``bbox_anchor`` and covers
    ``bbox_extent`` consecutive (wrapped) grid indices.
    """

    component_id: int
    voxels: np.ndarray
    bbox_anchor: np.ndarray
    bbox_extent: np.ndarray
    n: int
    source_component: str | None = None
    threshold: float = 0.0

    @property
    def voxel_count(self):
        return int(self.voxels.size)

    def indices(self):
        """Grid indices ``(ix, iy, iz)`` of the voxels, each shape ``(m,)``."""
        n = self.n
        v = self.voxels
        return v % n, (v // n) % n, v // (n * n)

    def unwrapped_indices(self):
        """Voxel indices shifted to lie in ``[anchor, anchor + extent)``."""
        return tuple(self.bbox_anchor[a] + (idx - self.bbox_anchor[a]) % self.n
                     for a, idx in enumerate(self.indices()))

    def mask(self):
        out = np.zeros(self.n**3, dtype=bool)
        out[self.voxels] = True
        return out.reshape((self.n,) * 3, order="F")

    def bbox_half_width(self, spacing):
        """Half the smallest width of a box that holds the RIV's isosurface.

        The surface lies within one spacing beyond the outermost voxel
        centers, so no sphere inside it can exceed this radius.
        """
        return 0.5 * (float(np.min(self.bbox_extent)) + 1.0) * spacing

    def to_dict(self):
        return {
            "component_id": self.component_id,
            "voxel_count": self.voxel_count,
            "bbox": {"anchor": [int(a) for a in self.bbox_anchor],
                     "extent": [int(e) for e in self.bbox_extent]},
            "source_component": self.source_component,
            "threshold": self.threshold,
        }


def _periodic_span(coords, n):
    """Anchor and extent of the shortest periodic arc covering ``coords``."""
    occupied = np.zeros(n, dtype=bool)
    occupied[coords] = True
    if occupied.all():
        return 0, n
    # longest circular run of empty slots; the box starts right after it
    empty = ~occupied
    doubled = np.concatenate([empty, empty])
    best_len, best_end, run = 0, 0, 0
    for i, e in enumerate(doubled):
        run = run + 1 if e else 0
        if run > best_len and run <= n:
            best_len, best_end = run, i
    anchor = (best_end + 1) % n
    return anchor, n - best_len


_RANK = {6: 1, 18: 2, 26: 3}


def _structure(connectivity):
    if connectivity not in _RANK:
        raise ValueError(f"connectivity must be 6, 18 or 26, got {connectivity!r}")
    return ndimage.generate_binary_structure(3, _RANK[connectivity])


def _neighbor_offsets(connectivity):
    offsets = []
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            for dz in (-1, 0, 1):
                d = abs(dx) + abs(dy) + abs(dz)
                if d == 0 or d > _RANK[connectivity]:
                    continue
                if (dx, dy, dz) > (0, 0, 0):
                    offsets.append((dx, dy, dz))
    return offsets


def label_periodic(mask, connectivity=26):
    """Label connected components with periodic adjacency.

    Returns ``(labels, count)`` with labels in ``1..count`` assigned in the
    canonical order (decreasing size, ties by smallest x-fastest index).
    """
    mask = np.asarray(mask, dtype=bool)
    labels, count = ndimage.label(mask, structure=_structure(connectivity))
    if count == 0:
        return labels, 0
    parent = np.arange(count + 1)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    # pairs of distinct labels can only meet across a periodic face
    pairs = []
    for off in _neighbor_offsets(connectivity):
        shifted = np.roll(labels, shift=tuple(-d for d in off), axis=(0, 1, 2))
        sel = (labels > 0) & (shifted > 0) & (labels != shifted)
        if sel.any():
            pairs.append(np.stack([labels[sel], shifted[sel]], axis=1))
    if pairs:
        for a, b in np.unique(np.concatenate(pairs), axis=0):
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(a) for a in range(count + 1)])
    merged = roots[labels]

    flat = merged.ravel(order="F")
    lin = np.arange(flat.size)
    on = flat > 0
    sizes = np.bincount(flat[on], minlength=count + 1)
    first = np.full(count + 1, flat.size, dtype=np.int64)
    np.minimum.at(first, flat[on], lin[on])
    present = np.nonzero(sizes)[0]
    order = sorted(present, key=lambda lab: (-sizes[lab], first[lab]))
    relabel = np.zeros(count + 1, dtype=np.int64)
    relabel[order] = np.arange(1, len(order) + 1)
    return relabel[merged], len(order)


def connected_components(mask, connectivity=26, source_component=None, threshold=0.0):
    """Partition a mask into periodic-connected RIVs in canonical order."""
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 3 or len(set(mask.shape)) != 1:
        raise ValueError(f"mask must be a cubic 3-D array, got shape {mask.shape}")
    n = mask.shape[0]
    labels, count = label_periodic(mask, connectivity)
    if count == 0:
        return []
    flat = labels.ravel(order="F")
    lin = np.nonzero(flat)[0]
    labs = flat[lin]
    order = np.argsort(labs, kind="stable")
    lin, labs = lin[order], labs[order]
    bounds = np.searchsorted(labs, np.arange(1, count + 2))
    rivs = []
    for c in range(count):
        voxels = lin[bounds[c]:bounds[c + 1]]
        idx = (voxels % n, (voxels // n) % n, voxels // (n * n))
        spans = [_periodic_span(i, n) for i in idx]
        rivs.append(Riv(
            component_id=c,
            voxels=voxels,
            bbox_anchor=np.array([s[0] for s in spans]),
            bbox_extent=np.array([s[1] for s in spans]),
            n=n,
            source_component=source_component,
            threshold=float(threshold),
        ))
    return rivs


def ball_voxel_weights(dx, dy, dz, r, spacing):
    """Fraction of each voxel inside a ball of radius ``r``.

    ``dx, dy, dz`` are broadcastable offsets of voxel centers from the ball
    center. Voxels whose center lies within one cell diagonal of the sphere
    are integrated on a 4x4x4 subcell midpoint grid; the rest count as fully
    in or fully out by their center.
    """
    dist = np.sqrt(dx * dx + dy * dy + dz * dz)
    weights = (dist <= r).astype(np.float64)
    near = np.abs(dist - r) <= np.sqrt(3.0) * spacing
    if not near.any():
        return weights
    bx, by, bz = np.broadcast_arrays(dx, dy, dz)
    nx, ny, nz = bx[near], by[near], bz[near]
    sub = (np.arange(SUBCELLS) + 0.5) / SUBCELLS - 0.5
    inside = np.zeros(nx.shape)
    r2 = r * r
    for sx in sub:
        px2 = (nx + sx * spacing) ** 2
        for sy in sub:
            pxy2 = px2 + (ny + sy * spacing) ** 2
            for sz in sub:
                inside += pxy2 + (nz + sz * spacing) ** 2 <= r2
    weights = np.broadcast_to(weights, bx.shape).copy()
    weights[near] = inside / SUBCELLS**3
    return weights


def _check_radius(r, grid):
    r = check_positive(r, "r")
    if r >= grid.domain_length / 2:
        raise ValueError(f"r={r!r} must be below domain_length/2={grid.domain_length / 2!r}")
    return r


def sparseness_ratio(mask, grid, x0, r):
    """Volume fraction of the periodic ball ``B(x0, r)`` covered by ``mask``.

    Voxel ``i`` is the cube of side ``spacing`` centered at grid point
    ``i * spacing``; the ball volume is integrated with the same quadrature so
    that a full mask gives exactly 1.
    """
    mask = check_mask(mask, grid)
    x0 = check_point(x0, "x0")
    r = _check_radius(r, grid)
    h = grid.spacing
    reach = r + np.sqrt(3.0) * h
    axes = []
    for a in range(3):
        lo = int(np.floor((x0[a] - reach) / h))
        hi = int(np.ceil((x0[a] + reach) / h))
        axes.append(np.arange(lo, hi + 1))
    ix, iy, iz = axes
    w = ball_voxel_weights(
        (ix * h - x0[0])[:, None, None],
        (iy * h - x0[1])[None, :, None],
        (iz * h - x0[2])[None, None, :],
        r, h,
    )
    n = grid.n
    sub = mask[np.ix_(ix % n, iy % n, iz % n)]
    total = float(np.sum(w))
    return float(np.sum(w[sub])) / total


def ball_kernel(grid, r):
    """Periodic grid kernel of ball weights centered at the origin voxel."""
    n, h = grid.n, grid.spacing
    m = int(np.ceil(r / h + np.sqrt(3.0))) + 1
    off = np.arange(-m, m + 1)
    w = ball_voxel_weights(
        (off * h)[:, None, None], (off * h)[None, :, None], (off * h)[None, None, :], r, h
    )
    kernel = np.zeros(grid.shape)
    idx = off % n
    # images that wrap onto the same voxel add up, as in sparseness_ratio
    np.add.at(kernel, np.ix_(idx, idx, idx), w)
    return kernel


def sparseness_ratio_field(mask, grid, r, kernel_hat=None):
    """:func:`sparseness_ratio` evaluated at every grid point at once."""
    if kernel_hat is None:
        kernel = ball_kernel(grid, r)
        kernel_hat = forward(kernel) / np.sum(kernel)
    mask_hat = forward(np.asarray(mask, dtype=np.float64))
    # correlation == convolution here since the kernel is symmetric
    return inverse(mask_hat * kernel_hat, grid)


@dataclass(frozen=True)
class ZAlphaParams:
    lam: float = 0.5
    delta: float = 0.5
    c0: float = 2.0
    alpha: float = 0.5

    def __post_init__(self):
        check_fraction(self.lam, "lambda")
        check_fraction(self.delta, "delta")
        if not self.c0 > 1:
            raise ValueError(f"c0 must exceed 1, got {self.c0!r}")
        check_positive(self.alpha, "alpha")


@dataclass
class ZAlphaResult:
    """Outcome of :func:`z_alpha_check`.

    ``worst_index`` is the grid point whose best ratio over the admissible
    scales is largest (first in x-fastest order on ties); ``worst_ratio`` is
    that best ratio and ``worst_scale`` the scale attaining it.
    """

    verdict: bool
    degenerate: bool = False
    worst_index: tuple | None = None
    worst_point: np.ndarray | None = None
    worst_ratio: float = 0.0
    worst_scale: float | None = None
    worst_component: str | None = None
    scales: np.ndarray = field(default_factory=lambda: np.empty(0))
    points_checked: int = 0


def admissible_scales(norm, params, n_scales=16):
    base = norm ** (-params.alpha)
    return np.geomspace(base / params.c0, base * params.c0, n_scales)


def z_alpha_check(f, grid, params=ZAlphaParams(), n_scales=16, restrict=False, tol=1e-12):
    """Test whether ``f`` lies in the class Z_alpha(lambda, delta; c0).

    At every grid point ``x0`` the first component part attaining the
    pointwise max-norm is selected, and its super-level set at
    ``lambda * |f|_inf`` must be ``delta``-sparse around ``x0`` at one of
    ``n_scales`` geometrically spaced scales in
    ``[|f|_inf**-alpha / c0, c0 * |f|_inf**-alpha]``.

    ``restrict=True`` only checks points where the pointwise max-norm is at
    least ``lambda * |f|_inf``. Ratios are computed for all points at once by
    periodic FFT correlation with the ball kernel; ``tol`` absorbs its
    round-off when comparing against ``delta``.
    """
    f = check_vector_field(f, grid)
    norm = max_norm(f)
    if norm == 0.0:
        return ZAlphaResult(verdict=True, degenerate=True)
    scales = admissible_scales(norm, params, n_scales)
    if scales[-1] >= grid.domain_length / 2:
        raise ValueError(
            f"scale exceeds periodic box: largest admissible scale {scales[-1]:.6g} "
            f">= domain_length/2 = {grid.domain_length / 2:.6g}"
        )
    parts = component_parts(f)
    cut = params.lam * norm
    selected = np.argmax(parts, axis=0)
    points = np.ones(grid.shape, dtype=bool)
    if restrict:
        points = np.max(parts, axis=0) >= cut
    best = np.full(grid.shape, np.inf)
    best_scale = np.full(grid.shape, np.nan)
    used = np.unique(selected[points])
    for r in scales:
        kernel = ball_kernel(grid, r)
        kernel_hat = forward(kernel) / np.sum(kernel)
        for c in used:
            ratio = sparseness_ratio_field(parts[c] > cut, grid, r, kernel_hat)
            sel = points & (selected == c) & (ratio < best)
            best[sel] = ratio[sel]
            best_scale[sel] = r
    best = np.where(points, np.clip(best, 0.0, 1.0), -np.inf)
    flat = best.ravel(order="F")
    worst_lin = int(np.argmax(flat))
    ix, iy, iz = grid.unravel(worst_lin)
    worst = float(flat[worst_lin])
    return ZAlphaResult(
        verdict=bool(worst <= params.delta + tol),
        worst_index=(int(ix), int(iy), int(iz)),
        worst_point=np.array([ix, iy, iz], dtype=np.float64) * grid.spacing,
        worst_ratio=worst,
        worst_scale=float(best_scale[ix, iy, iz]),
        worst_component=COMPONENT_NAMES[int(selected[ix, iy, iz])],
        scales=scales,
        points_checked=int(np.count_nonzero(points)),
    )


def component_masks(f, lam):
    """Super-level masks of the six component parts at ``lam * |f|_inf``."""
    norm = max_norm(f)
    cut = lam * norm
    return component_parts(f) > cut, cut
