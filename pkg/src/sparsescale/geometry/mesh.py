"""Triangle meshes of iso-surfaces, with periodic stitching."""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from skimage.measure import marching_cubes

from .._validation import check_scalar_field


@dataclass
class TriangleMesh:
    """Vertices in physical coordinates and triangles as vertex index triples.

    ``orientable`` is true when every edge is shared by exactly two triangles
    traversing it in opposite directions, i.e. the mesh is closed and
    consistently wound as assembled.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    orientable: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if self.triangles.size and (self.triangles.min() < 0
                                    or self.triangles.max() >= len(self.vertices)):
            raise ValueError("triangle indices out of range")

    @classmethod
    def empty(cls):
        return cls(np.empty((0, 3)), np.empty((0, 3), dtype=np.int64))

    def __len__(self):
        return len(self.triangles)

    @property
    def is_empty(self):
        return len(self.triangles) == 0

    def corners(self):
        """``(a, b, c)`` corner coordinate arrays, each ``(k, 3)``."""
        t = self.triangles
        v = self.vertices
        return v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]

    def areas(self):
        a, b, c = self.corners()
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def area(self):
        return float(np.sum(self.areas()))

    def cleaned(self, tol=1e-14):
        """Drop zero-area triangles and unreferenced vertices."""
        if self.is_empty:
            return self
        t = self.triangles
        scale = np.max(np.ptp(self.vertices, axis=0)) if len(self.vertices) else 1.0
        keep = ((t[:, 0] != t[:, 1]) & (t[:, 1] != t[:, 2]) & (t[:, 0] != t[:, 2])
                & (self.areas() > tol * max(scale, 1e-300) ** 2))
        t = t[keep]
        used, inverse = np.unique(t, return_inverse=True)
        mesh = TriangleMesh(self.vertices[used], inverse.reshape(-1, 3), meta=dict(self.meta))
        mesh.orientable = mesh.check_orientable()
        return mesh

    def check_orientable(self):
        if self.is_empty:
            return False
        t = self.triangles
        directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        nv = len(self.vertices)
        keys = directed[:, 0] * nv + directed[:, 1]
        if np.unique(keys).size != keys.size:
            return False
        rev = directed[:, 1] * nv + directed[:, 0]
        return bool(np.all(np.isin(rev, keys)))

    def to_obj(self, path=None):
        """ASCII Wavefront OBJ with 1-based indices; written to ``path`` if given."""
        lines = [f"v {x!r} {y!r} {z!r}" for x, y, z in self.vertices.tolist()]
        lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in self.triangles.tolist()]
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_obj(cls, text):
        verts, tris = [], []
        for line in text.splitlines():
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(p) for p in parts[1:4]])
            elif parts[0] == "f":
                tris.append([int(p.split("/")[0]) - 1 for p in parts[1:4]])
        mesh = cls(np.array(verts).reshape(-1, 3), np.array(tris, dtype=np.int64).reshape(-1, 3))
        mesh.orientable = mesh.check_orientable()
        return mesh


def _march(volume, level, spacing, origin):
    lo, hi = float(np.min(volume)), float(np.max(volume))
    if not lo < level < hi:
        return TriangleMesh.empty()
    verts, faces, _, _ = marching_cubes(volume, level=level, spacing=(spacing,) * 3,
                                        method="lewiner", allow_degenerate=False)
    mesh = TriangleMesh(verts + np.asarray(origin, dtype=np.float64), faces)
    return mesh.cleaned()


def extract_isosurface(s, grid, level):
    """Marching-cubes surface ``{s = level}`` over the whole periodic box.

    The field is wrapped by one layer on the high side of each axis so the
    cells straddling the periodic faces are meshed too; vertices lie in
    ``[0, domain_length]``. A level outside the field's range gives an empty
    mesh.
    """
    s = check_scalar_field(s, grid)
    padded = np.pad(s, ((0, 1),) * 3, mode="wrap")
    return _march(padded, level, grid.spacing, (0.0, 0.0, 0.0))


@dataclass
class RivBlock:
    """Wrapped sub-block of the field around one RIV.

    ``start`` is the unwrapped global grid index of block element 0 on each
    axis; block element ``b`` sits at physical coordinate
    ``(start + b) * spacing``.
    """

    values: np.ndarray
    start: np.ndarray
    spacing: float


def riv_block(riv, s, grid, level, full_margin=None):
    """Extract the RIV's field block with one layer of margin.

    Voxels above ``level`` that do not belong to the RIV are pushed below it,
    so only this RIV's surface is meshed. On an axis where the RIV wraps the
    whole box, the block repeats ``full_margin`` periodic layers on each side
    (default ``n // 4``) and is then closed by a sentinel layer.
    """
    n = riv.n
    if full_margin is None:
        full_margin = max(1, n // 4)
    hi = float(np.max(s))
    sentinel = level - max(hi - level, abs(level), 1.0)
    index_lists, starts = [], []
    for a in range(3):
        anchor, extent = int(riv.bbox_anchor[a]), int(riv.bbox_extent[a])
        margin = 1 if extent <= n - 1 else full_margin
        start = anchor - margin
        index_lists.append(np.arange(start, anchor + extent + margin) % n)
        starts.append(start)
    sel = np.ix_(*index_lists)
    block = s[sel]
    block = np.where((block > level) & ~riv.mask()[sel], sentinel, block)
    block = np.pad(block, 1, mode="constant", constant_values=sentinel)
    return RivBlock(block, np.array(starts) - 1, grid.spacing)


def riv_isosurface(riv, s, grid, level=None):
    """Closed mesh of one RIV's boundary in unwrapped physical coordinates."""
    return _riv_isosurface(riv, check_scalar_field(s, grid), grid, level)


def _riv_isosurface(riv, s, grid, level=None):
    if level is None:
        level = riv.threshold
    block = riv_block(riv, s, grid, level)
    origin = block.start * grid.spacing
    mesh = _march(block.values, level, grid.spacing, origin)
    mesh.meta.update(riv_id=riv.component_id, source_component=riv.source_component)
    return mesh
