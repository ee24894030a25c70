"""Axis-aligned bounding box hierarchy over a triangle mesh.

Distance queries are exact branch-and-bound searches; inside/outside is a
majority vote of ray crossing parities, which needs no consistent winding.
The kernels are compiled with numba; every query is independent per point,
so results do not depend on evaluation order.
"""

import numpy as np
from numba import njit

from .._validation import check_point

DEFAULT_RAYS = 5
MAX_RETRIES = 4
_STACK = 256


@njit(cache=True)
def _build(centroids, tri_lo, tri_hi, leaf_size):
    k = centroids.shape[0]
    order = np.arange(k)
    max_nodes = 2 * k + 1
    node_lo = np.empty((max_nodes, 3))
    node_hi = np.empty((max_nodes, 3))
    left = -np.ones(max_nodes, dtype=np.int64)
    right = -np.ones(max_nodes, dtype=np.int64)
    start = np.zeros(max_nodes, dtype=np.int64)
    count = np.zeros(max_nodes, dtype=np.int64)
    st_node = np.empty(max_nodes, dtype=np.int64)
    st_lo = np.empty(max_nodes, dtype=np.int64)
    st_hi = np.empty(max_nodes, dtype=np.int64)
    sp = 1
    st_node[0] = 0
    st_lo[0] = 0
    st_hi[0] = k
    n_nodes = 1
    while sp > 0:
        sp -= 1
        node = st_node[sp]
        s = st_lo[sp]
        e = st_hi[sp]
        clo = np.full(3, np.inf)
        chi = np.full(3, -np.inf)
        for a in range(3):
            node_lo[node, a] = np.inf
            node_hi[node, a] = -np.inf
        for i in range(s, e):
            t = order[i]
            for a in range(3):
                node_lo[node, a] = min(node_lo[node, a], tri_lo[t, a])
                node_hi[node, a] = max(node_hi[node, a], tri_hi[t, a])
                clo[a] = min(clo[a], centroids[t, a])
                chi[a] = max(chi[a], centroids[t, a])
        if e - s <= leaf_size:
            start[node] = s
            count[node] = e - s
            continue
        axis = 0
        for a in range(1, 3):
            if chi[a] - clo[a] > chi[axis] - clo[axis]:
                axis = a
        sub = order[s:e].copy()
        keys = np.empty(e - s)
        for i in range(e - s):
            keys[i] = centroids[sub[i], axis]
        idx = np.argsort(keys, kind="mergesort")
        for i in range(e - s):
            order[s + i] = sub[idx[i]]
        mid = (s + e) // 2
        left[node] = n_nodes
        right[node] = n_nodes + 1
        st_node[sp] = n_nodes
        st_lo[sp] = s
        st_hi[sp] = mid
        sp += 1
        st_node[sp] = n_nodes + 1
        st_lo[sp] = mid
        st_hi[sp] = e
        sp += 1
        n_nodes += 2
    return (order, node_lo[:n_nodes].copy(), node_hi[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), start[:n_nodes].copy(), count[:n_nodes].copy())


@njit(cache=True)
def _dot(u0, u1, u2, v0, v1, v2):
    return u0 * v0 + u1 * v1 + u2 * v2


@njit(cache=True)
def _point_triangle_dist2(p, a, b, c):
    """Squared distance from ``p`` to triangle ``abc`` (Voronoi-region walk)."""
    abx, aby, abz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    acx, acy, acz = c[0] - a[0], c[1] - a[1], c[2] - a[2]
    apx, apy, apz = p[0] - a[0], p[1] - a[1], p[2] - a[2]
    d1 = _dot(abx, aby, abz, apx, apy, apz)
    d2 = _dot(acx, acy, acz, apx, apy, apz)
    if d1 <= 0.0 and d2 <= 0.0:
        qx, qy, qz = a[0], a[1], a[2]
    else:
        bpx, bpy, bpz = p[0] - b[0], p[1] - b[1], p[2] - b[2]
        d3 = _dot(abx, aby, abz, bpx, bpy, bpz)
        d4 = _dot(acx, acy, acz, bpx, bpy, bpz)
        cpx, cpy, cpz = p[0] - c[0], p[1] - c[1], p[2] - c[2]
        d5 = _dot(abx, aby, abz, cpx, cpy, cpz)
        d6 = _dot(acx, acy, acz, cpx, cpy, cpz)
        vc = d1 * d4 - d3 * d2
        vb = d5 * d2 - d1 * d6
        va = d3 * d6 - d5 * d4
        if d3 >= 0.0 and d4 <= d3:
            qx, qy, qz = b[0], b[1], b[2]
        elif vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
            v = d1 / (d1 - d3)
            qx, qy, qz = a[0] + v * abx, a[1] + v * aby, a[2] + v * abz
        elif d6 >= 0.0 and d5 <= d6:
            qx, qy, qz = c[0], c[1], c[2]
        elif vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
            w = d2 / (d2 - d6)
            qx, qy, qz = a[0] + w * acx, a[1] + w * acy, a[2] + w * acz
        elif va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
            w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
            qx = b[0] + w * (c[0] - b[0])
            qy = b[1] + w * (c[1] - b[1])
            qz = b[2] + w * (c[2] - b[2])
        else:
            denom = 1.0 / (va + vb + vc)
            v = vb * denom
            w = vc * denom
            qx = a[0] + abx * v + acx * w
            qy = a[1] + aby * v + acy * w
            qz = a[2] + abz * v + acz * w
    dx, dy, dz = p[0] - qx, p[1] - qy, p[2] - qz
    return dx * dx + dy * dy + dz * dz


@njit(cache=True)
def _box_dist2(p, lo, hi):
    d2 = 0.0
    for a in range(3):
        if p[a] < lo[a]:
            d2 += (lo[a] - p[a]) ** 2
        elif p[a] > hi[a]:
            d2 += (p[a] - hi[a]) ** 2
    return d2


@njit(cache=True)
def _distances(points, node_lo, node_hi, left, right, start, count, ta, tb, tc):
    m = points.shape[0]
    out = np.empty(m)
    stack = np.empty(_STACK, dtype=np.int64)
    for i in range(m):
        p = points[i]
        best = np.inf
        stack[0] = 0
        sp = 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            if _box_dist2(p, node_lo[node], node_hi[node]) >= best:
                continue
            if left[node] < 0:
                for t in range(start[node], start[node] + count[node]):
                    d2 = _point_triangle_dist2(p, ta[t], tb[t], tc[t])
                    if d2 < best:
                        best = d2
            else:
                l, r = left[node], right[node]
                dl = _box_dist2(p, node_lo[l], node_hi[l])
                dr = _box_dist2(p, node_lo[r], node_hi[r])
                # push the farther child first so the nearer one is searched first
                if dl <= dr:
                    if dr < best:
                        stack[sp] = r
                        sp += 1
                    if dl < best:
                        stack[sp] = l
                        sp += 1
                else:
                    if dl < best:
                        stack[sp] = l
                        sp += 1
                    if dr < best:
                        stack[sp] = r
                        sp += 1
        out[i] = np.sqrt(best)
    return out


@njit(cache=True)
def _ray_box(o, inv_d, lo, hi):
    tmin = 0.0
    tmax = np.inf
    for a in range(3):
        t1 = (lo[a] - o[a]) * inv_d[a]
        t2 = (hi[a] - o[a]) * inv_d[a]
        if t1 > t2:
            t1, t2 = t2, t1
        if t1 > tmin:
            tmin = t1
        if t2 < tmax:
            tmax = t2
        if tmin > tmax:
            return False
    return True


@njit(cache=True)
def _ray_crossings(o, d, node_lo, node_hi, left, right, start, count, ta, tb, tc, eps):
    """Number of triangles crossed by the ray ``o + t d, t > 0``, plus a flag
    set when a hit grazes an edge/vertex or the origin lies on the surface."""
    inv_d = np.empty(3)
    for a in range(3):
        inv_d[a] = 1.0 / d[a] if d[a] != 0.0 else np.inf
    stack = np.empty(_STACK, dtype=np.int64)
    stack[0] = 0
    sp = 1
    hits = 0
    degenerate = False
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if not _ray_box(o, inv_d, node_lo[node], node_hi[node]):
            continue
        if left[node] >= 0:
            stack[sp] = left[node]
            sp += 1
            stack[sp] = right[node]
            sp += 1
            continue
        for t in range(start[node], start[node] + count[node]):
            a, b, c = ta[t], tb[t], tc[t]
            e1x, e1y, e1z = b[0] - a[0], b[1] - a[1], b[2] - a[2]
            e2x, e2y, e2z = c[0] - a[0], c[1] - a[1], c[2] - a[2]
            px = d[1] * e2z - d[2] * e2y
            py = d[2] * e2x - d[0] * e2z
            pz = d[0] * e2y - d[1] * e2x
            det = e1x * px + e1y * py + e1z * pz
            scale = np.sqrt(e1x * e1x + e1y * e1y + e1z * e1z) * np.sqrt(e2x * e2x + e2y * e2y + e2z * e2z)
            if abs(det) <= 1e-14 * scale:
                continue
            inv = 1.0 / det
            sx, sy, sz = o[0] - a[0], o[1] - a[1], o[2] - a[2]
            u = (sx * px + sy * py + sz * pz) * inv
            if u < -eps or u > 1.0 + eps:
                continue
            qx = sy * e1z - sz * e1y
            qy = sz * e1x - sx * e1z
            qz = sx * e1y - sy * e1x
            v = (d[0] * qx + d[1] * qy + d[2] * qz) * inv
            if v < -eps or u + v > 1.0 + eps:
                continue
            tt = (e2x * qx + e2y * qy + e2z * qz) * inv
            length = np.sqrt(scale)
            if tt <= eps * length:
                if tt > -eps * length:
                    degenerate = True
                continue
            if u < eps or v < eps or u + v > 1.0 - eps:
                degenerate = True
            hits += 1
    return hits, degenerate


@njit(cache=True)
def _parity_votes(points, dirs, node_lo, node_hi, left, right, start, count, ta, tb, tc, eps):
    m = points.shape[0]
    k = dirs.shape[0]
    inside = np.zeros((m, k), dtype=np.bool_)
    degenerate = np.zeros((m, k), dtype=np.bool_)
    for i in range(m):
        for j in range(k):
            hits, deg = _ray_crossings(points[i], dirs[j], node_lo, node_hi, left, right,
                                       start, count, ta, tb, tc, eps)
            inside[i, j] = hits % 2 == 1
            degenerate[i, j] = deg
    return inside, degenerate


def random_directions(rng, k):
    d = rng.normal(size=(k, 3))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


class AabbTree:
    """Bounding box hierarchy over the triangles of a :class:`TriangleMesh`.

    Nodes are split at the median centroid along the longest centroid extent;
    leaves hold at most ``leaf_size`` triangles.
    """

    def __init__(self, mesh, leaf_size=8):
        if leaf_size < 1:
            raise ValueError("leaf_size must be >= 1")
        self.mesh = mesh
        self.leaf_size = int(leaf_size)
        a, b, c = mesh.corners()
        if len(a) == 0:
            self.size = 0
            return
        self.size = len(a)
        tri_lo = np.minimum(np.minimum(a, b), c)
        tri_hi = np.maximum(np.maximum(a, b), c)
        centroids = (a + b + c) / 3.0
        (order, self.node_lo, self.node_hi, self.left, self.right,
         self.start, self.count) = _build(centroids, tri_lo, tri_hi, self.leaf_size)
        self.order = order
        self.ta = np.ascontiguousarray(a[order])
        self.tb = np.ascontiguousarray(b[order])
        self.tc = np.ascontiguousarray(c[order])
        self.extent = float(np.max(tri_hi.max(axis=0) - tri_lo.min(axis=0)))

    def _arrays(self):
        return (self.node_lo, self.node_hi, self.left, self.right, self.start, self.count,
                self.ta, self.tb, self.tc)

    def _require(self):
        if self.size == 0:
            raise ValueError("empty tree: the mesh has no triangles")

    def distances(self, points):
        self._require()
        points = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 3))
        return _distances(points, *self._arrays())

    def parity_votes(self, points, dirs, eps=1e-9):
        self._require()
        points = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 3))
        dirs = np.ascontiguousarray(dirs, dtype=np.float64)
        return _parity_votes(points, dirs, *self._arrays(), eps)

    def contains_check(self):
        """True if every triangle lies in its leaf box and children in parents."""
        if self.size == 0:
            return True
        lo = np.minimum(np.minimum(self.ta, self.tb), self.tc)
        hi = np.maximum(np.maximum(self.ta, self.tb), self.tc)
        for node in range(len(self.left)):
            if self.left[node] < 0:
                sl = slice(self.start[node], self.start[node] + self.count[node])
                if np.any(lo[sl] < self.node_lo[node]) or np.any(hi[sl] > self.node_hi[node]):
                    return False
            else:
                for child in (self.left[node], self.right[node]):
                    if (np.any(self.node_lo[child] < self.node_lo[node])
                            or np.any(self.node_hi[child] > self.node_hi[node])):
                        return False
        return True


def unsigned_distance(tree, p):
    """Exact distance from ``p`` (a point or an ``(m, 3)`` array) to the mesh."""
    if np.ndim(p) == 1:
        return float(tree.distances(check_point(p))[0])
    return tree.distances(p)


def inside_test(tree, mesh=None, p=None, rays=DEFAULT_RAYS, seed=0, return_flags=False):
    """Ray-parity majority vote of whether ``p`` is enclosed by the mesh.

    ``rays`` directions come from a generator seeded with ``seed``. Rays that
    graze an edge or vertex do not vote; points whose remaining votes tie (or
    that have none) are retried with fresh directions up to a fixed number of
    times, after which all votes count and the point is flagged. ``mesh`` is
    accepted for symmetry with the distance API; the tree already holds it.
    """
    single = np.ndim(p) == 1
    points = np.asarray(p, dtype=np.float64).reshape(-1, 3)
    rng = np.random.default_rng(seed)
    result = np.zeros(len(points), dtype=bool)
    flagged = np.zeros(len(points), dtype=bool)
    pending = np.arange(len(points))
    for attempt in range(MAX_RETRIES + 1):
        dirs = random_directions(rng, rays)
        inside, deg = tree.parity_votes(points[pending], dirs)
        valid = ~deg
        yes = np.sum(inside & valid, axis=1)
        total = np.sum(valid, axis=1)
        decided = (total > 0) & (2 * yes != total)
        result[pending[decided]] = 2 * yes[decided] > total[decided]
        if attempt == MAX_RETRIES:
            rest = ~decided
            result[pending[rest]] = 2 * np.sum(inside[rest], axis=1) > rays
            flagged[pending[rest]] = True
            break
        pending = pending[~decided]
        if pending.size == 0:
            break
    if single:
        return (bool(result[0]), bool(flagged[0])) if return_flags else bool(result[0])
    return (result, flagged) if return_flags else result


def signed_distance(tree, points, rays=DEFAULT_RAYS, seed=0):
    """Unsigned distance times +1 inside / -1 outside."""
    d = tree.distances(points)
    sign = np.where(inside_test(tree, None, np.asarray(points).reshape(-1, 3), rays, seed), 1.0, -1.0)
    return d * sign


def brute_force_distance(mesh, points, chunk=4096):
    """Minimum point-to-triangle distance by scanning every triangle.

    Independent of the hierarchy and of its kernel: the closest point is the
    plane projection when that falls inside the triangle, otherwise the
    nearest point on one of the three edges.
    """
    if mesh.is_empty:
        raise ValueError("empty mesh")
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    a, b, c = mesh.corners()
    normal = np.cross(b - a, c - a)
    normal /= np.linalg.norm(normal, axis=1, keepdims=True)

    def seg(p, s0, s1):
        d = s1 - s0
        t = np.clip(np.einsum("pkj,kj->pk", p - s0, d) / np.einsum("kj,kj->k", d, d), 0.0, 1.0)
        q = s0 + t[..., None] * d
        return np.linalg.norm(p - q, axis=-1)

    out = np.empty(len(points))
    step = max(1, chunk * 64 // max(len(a), 1))
    for lo in range(0, len(points), step):
        p = points[lo:lo + step, None, :]
        h = np.einsum("pkj,kj->pk", p - a, normal)
        q = p - h[..., None] * normal
        # barycentric sign test of the projection
        s1 = np.einsum("pkj,kj->pk", np.cross(b - a, q - a), normal)
        s2 = np.einsum("pkj,kj->pk", np.cross(c - b, q - b), normal)
        s3 = np.einsum("pkj,kj->pk", np.cross(a - c, q - c), normal)
        inside = (s1 >= 0) & (s2 >= 0) & (s3 >= 0)
        edge = np.minimum(np.minimum(seg(p, a, b), seg(p, b, c)), seg(p, c, a))
        d = np.where(inside, np.abs(h), edge)
        out[lo:lo + step] = d.min(axis=1)
    return out
