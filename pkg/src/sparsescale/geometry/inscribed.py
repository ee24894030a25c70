"""Largest inscribed sphere per RIV and over a set of RIVs."""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .._validation import check_mask, check_scalar_field
from .bvh import DEFAULT_RAYS, AabbTree, inside_test
from .mesh import _riv_isosurface

logger = logging.getLogger(__name__)


@dataclass
class InscribedSphereResult:
    center: np.ndarray
    radius: float
    riv_id: int
    refinement_depth: int = 0
    source_component: str | None = None
    sub_voxel: bool = False
    pruned: bool = False
    evaluated: int = 1
    skipped: int = 0
    records: list = field(default_factory=list, repr=False)

    def to_dict(self):
        return {
            "riv_id": self.riv_id,
            "source_component": self.source_component,
            "center": [float(c) for c in self.center],
            "radius": float(self.radius),
            "refinement_depth": self.refinement_depth,
            "pruned": self.pruned,
            "sub_voxel": self.sub_voxel,
        }


def _trilinear(s, points, spacing):
    coords = (np.asarray(points) / spacing).T
    return ndimage.map_coordinates(s, coords, order=1, mode="grid-wrap")


def _first_inside(tree, points, dist, floor, s, level, spacing, rays, seed, confirm):
    """Best candidate by distance that tests inside, among those above ``floor``."""
    order = np.argsort(-dist, kind="stable")
    order = order[dist[order] > floor]
    batch = 16
    for lo in range(0, order.size, batch):
        idx = order[lo:lo + batch]
        ok = inside_test(tree, None, points[idx], rays, seed)
        if confirm:
            ok &= _trilinear(s, points[idx], spacing) > level
        hit = np.nonzero(ok)[0]
        if hit.size:
            return int(idx[hit[0]])
        batch *= 2
    return None


def max_inscribed_radius(riv, s, grid, level=None, refine_levels=3, neighborhood=2,
                         rays=DEFAULT_RAYS, seed=0, leaf_size=8):
    """Largest sphere inside one RIV's iso-surface mesh.

    The signed distance to the mesh is evaluated at the RIV's voxel centers;
    then, ``refine_levels`` times, on a grid of half the previous spacing
    covering ``neighborhood`` previous cells around the current maximizer.
    Refined points count only if the ray vote says inside and the trilinear
    field value confirms it. The estimate never decreases between levels.
    """
    return _max_inscribed_radius(riv, check_scalar_field(s, grid), grid, level, refine_levels,
                                 neighborhood, rays, seed, leaf_size)


def _max_inscribed_radius(riv, s, grid, level=None, refine_levels=3, neighborhood=2,
                          rays=DEFAULT_RAYS, seed=0, leaf_size=8):
    if riv.voxel_count == 0:
        raise ValueError("empty RIV")
    if level is None:
        level = riv.threshold
    h = grid.spacing
    mesh = _riv_isosurface(riv, s, grid, level)
    ix, iy, iz = riv.unwrapped_indices()
    centers = np.stack([ix, iy, iz], axis=1) * h
    if mesh.is_empty:
        return InscribedSphereResult(np.mod(centers[0], grid.domain_length), 0.0,
                                     riv.component_id, 0, riv.source_component, sub_voxel=True)
    tree = AabbTree(mesh, leaf_size)
    dist = tree.distances(centers)
    best = _first_inside(tree, centers, dist, -np.inf, s, level, h, rays, seed, confirm=False)
    if best is None:
        logger.warning("RIV %d: no voxel center tested inside its mesh", riv.component_id)
        return InscribedSphereResult(np.mod(centers[0], grid.domain_length), 0.0,
                                     riv.component_id, 0, riv.source_component, sub_voxel=True)
    center, radius = centers[best], float(dist[best])
    step = h
    depth = 0
    for _ in range(refine_levels):
        fine = step / 2
        m = int(round(neighborhood * step / fine))
        off = np.arange(-m, m + 1) * fine
        grid_pts = np.stack(np.meshgrid(off, off, off, indexing="ij"), axis=-1).reshape(-1, 3)
        pts = center + grid_pts
        d = tree.distances(pts)
        pick = _first_inside(tree, pts, d, radius, s, level, h, rays, seed, confirm=True)
        if pick is not None:
            center, radius = pts[pick], float(d[pick])
        step = fine
        depth += 1
    return InscribedSphereResult(
        center=np.mod(center, grid.domain_length),
        radius=radius,
        riv_id=riv.component_id,
        refinement_depth=depth,
        source_component=riv.source_component,
        sub_voxel=radius < h,
    )


def voxel_distance_oracle(mask, grid):
    """Periodic Euclidean distance from interior voxel centers to the nearest
    exterior voxel center (zero outside the mask)."""
    mask = check_mask(mask, grid)
    if mask.all():
        raise ValueError("no exterior voxels")
    n = grid.n
    if not mask.any():
        return np.zeros(grid.shape)
    margin = 4
    while True:
        margin = min(margin, n)
        padded = np.pad(mask, margin, mode="wrap")
        dist = ndimage.distance_transform_edt(padded)
        core = dist[margin:margin + n, margin:margin + n, margin:margin + n]
        # exact once every distance is covered by the wrapped margin
        if core.max() <= margin or margin == n:
            return core * grid.spacing
        margin *= 2


def _resolve_field(fields, riv):
    if isinstance(fields, dict):
        if riv.source_component not in fields:
            raise KeyError(f"no field for source component {riv.source_component!r}")
        return fields[riv.source_component]
    return fields


def max_radius_over_rivs(rivs, fields, grid, level=None, prune=True, bound=None, **kwargs):
    """Greatest inscribed radius over many RIVs, with bounding-box pruning.

    ``fields`` maps each RIV's ``source_component`` to its scalar field, or is
    a single field shared by all. RIVs are visited in decreasing order of
    their bounding-box half-width (ties keep input order) and skipped once
    that half-width is below the best radius found so far, which cannot
    change the result. ``bound`` overrides the per-RIV upper bound.
    """
    rivs = list(rivs)
    if not rivs:
        raise ValueError("no RIVs given")
    if isinstance(fields, dict):
        fields = {k: check_scalar_field(v, grid, k) for k, v in fields.items()}
    else:
        fields = check_scalar_field(fields, grid)
    if bound is None:
        def bound(riv):
            return riv.bbox_half_width(grid.spacing)
    bounds = [bound(r) for r in rivs]
    order = sorted(range(len(rivs)), key=lambda i: -bounds[i])
    best = None
    best_radius = 0.0
    records = []
    evaluated = skipped = 0
    for i in order:
        riv = rivs[i]
        if prune and bounds[i] < best_radius:
            skipped += 1
            records.append({"riv_id": riv.component_id, "source_component": riv.source_component,
                            "pruned": True, "bound": bounds[i]})
            continue
        res = _max_inscribed_radius(riv, _resolve_field(fields, riv), grid, level, **kwargs)
        evaluated += 1
        rec = res.to_dict()
        rec["bound"] = bounds[i]
        records.append(rec)
        if best is None or res.radius > best.radius:
            best = res
            best_radius = res.radius
    if best is None:
        best = InscribedSphereResult(np.zeros(3), 0.0, -1, 0, None, pruned=True)
    best.evaluated = evaluated
    best.skipped = skipped
    best.records = records
    return best
