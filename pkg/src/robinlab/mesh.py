"""Conforming P1 triangulations of domains bounded by a BoundaryCurve."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import shapely
from scipy import sparse
from scipy.spatial import Delaunay, cKDTree

from .geometry import TWO_PI, BoundaryCurve, sample

MIN_ANGLE_DEG = 15.0
SMOOTHING_PASSES = 3
# lattice points closer than this fraction of the local size to the
# boundary polyline are dropped (they would make slivers)
BOUNDARY_CLEARANCE = 0.55


class MeshingError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangle mesh; the first ``n_boundary`` nodes are the boundary loop.

    ``bedges[e] = (i, j)`` runs counterclockwise, ``bparams[e] = (t_i, t_j)``
    are curve parameters (``t_j`` may exceed ``2 pi`` on the closing edge),
    ``blength`` and ``bnormal`` are polygon edge lengths and outward normals.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    bedges: np.ndarray
    bparams: np.ndarray
    blength: np.ndarray
    bnormal: np.ndarray
    h: float

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_boundary(self) -> int:
        return len(self.bedges)

    @property
    def boundary_nodes(self) -> np.ndarray:
        return self.bedges[:, 0]

    @property
    def node_params(self) -> np.ndarray:
        return self.bparams[:, 0]

    def areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted pairs."""
        e = np.vstack([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]],
                       self.triangles[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def adjacency(self) -> sparse.csr_matrix:
        e = self.edges()
        n = self.n_nodes
        a = sparse.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
        return (a + a.T).tocsr()

    def min_angle(self) -> float:
        return float(np.degrees(np.min(_triangle_angles(self.nodes, self.triangles))))

    def interior_mask(self) -> np.ndarray:
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.boundary_nodes] = False
        return mask

    def locator(self) -> "PointLocator":
        return PointLocator(self)

    def dump(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"NODES {self.n_nodes}\n")
            for i, (x, y) in enumerate(self.nodes):
                fh.write(f"{i} {float(x)!r} {float(y)!r}\n")
            fh.write(f"TRIANGLES {len(self.triangles)}\n")
            for a, b, c in self.triangles:
                fh.write(f"{a} {b} {c}\n")
            fh.write(f"BEDGES {self.n_boundary}\n")
            for (i, j), (ti, tj) in zip(self.bedges, self.bparams):
                fh.write(f"{i} {j} {float(ti)!r} {float(tj)!r}\n")


def load_mesh_dump(path):
    """Read a mesh dump back into ``(nodes, triangles, bedges, bparams)``."""
    sections = {}
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    i = 0
    while i < len(lines):
        name, count = lines[i].split()
        count = int(count)
        rows = [ln.split() for ln in lines[i + 1:i + 1 + count]]
        sections[name] = rows
        i += 1 + count
    nodes = np.array([[float(r[1]), float(r[2])] for r in sections["NODES"]])
    tris = np.array([[int(v) for v in r] for r in sections["TRIANGLES"]], dtype=int)
    be = sections["BEDGES"]
    bedges = np.array([[int(r[0]), int(r[1])] for r in be], dtype=int)
    bparams = np.array([[float(r[2]), float(r[3])] for r in be])
    return nodes, tris, bedges, bparams


class PointLocator:
    """Find the triangle containing a point and its barycentric weights."""

    def __init__(self, mesh: Mesh, k: int = 12):
        self.mesh = mesh
        p = mesh.nodes[mesh.triangles]
        self._tree = cKDTree(p.mean(axis=1))
        self._k = min(k, len(mesh.triangles))
        self._p0 = p[:, 0]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        self._inv = np.stack([np.stack([d2[:, 1], -d2[:, 0]], -1),
                              np.stack([-d1[:, 1], d1[:, 0]], -1)], 1) / det[:, None, None]

    def locate(self, pts):
        """Return ``(triangle index, barycentric coordinates)``; index -1 if outside."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        _, cand = self._tree.query(pts, k=self._k)
        cand = np.atleast_2d(cand).reshape(len(pts), -1)
        tri = np.full(len(pts), -1)
        bary = np.zeros((len(pts), 3))
        best = np.full(len(pts), -np.inf)
        for col in range(cand.shape[1]):
            c = cand[:, col]
            rel = pts - self._p0[c]
            lam = np.einsum("nij,nj->ni", self._inv[c], rel)
            b = np.column_stack([1.0 - lam.sum(1), lam])
            score = b.min(axis=1)
            better = score > best
            best[better] = score[better]
            tri[better] = c[better]
            bary[better] = b[better]
        outside = best < -1e-10
        tri[outside] = -1
        return tri, bary

    def interpolate(self, values, pts):
        """P1 interpolation of nodal ``values`` (n,) or (n, d); NaN outside."""
        tri, bary = self.locate(pts)
        values = np.asarray(values, dtype=float)
        nodes = self.mesh.triangles[np.maximum(tri, 0)]
        if values.ndim == 1:
            out = np.einsum("ni,ni->n", values[nodes], bary)
            out[tri < 0] = np.nan
        else:
            out = np.einsum("nid,ni->nd", values[nodes], bary)
            out[tri < 0] = np.nan
        return out


def _triangle_angles(nodes, tris):
    p = nodes[tris]
    ang = []
    for i in range(3):
        a = p[:, (i + 1) % 3] - p[:, i]
        b = p[:, (i + 2) % 3] - p[:, i]
        cosang = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        ang.append(np.arccos(np.clip(cosang, -1.0, 1.0)))
    return np.stack(ang, axis=1)


def _hex_lattice(xmin, xmax, ymin, ymax, pitch):
    dy = pitch * math.sqrt(3.0) / 2.0
    ny = int(math.ceil((ymax - ymin) / dy)) + 1
    nx = int(math.ceil((xmax - xmin) / pitch)) + 2
    j, i = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    x = xmin + i * pitch + 0.5 * pitch * (j % 2)
    y = ymin + j * dy
    return np.column_stack([x.ravel(), y.ravel()])


def _boundary_params(curve: BoundaryCurve, size_fn, h):
    """Curve parameters spaced so each arc is at most the local size."""
    m = max(4096, 64 * curve.degree, int(64 * TWO_PI / h))
    t = np.linspace(0.0, TWO_PI, m + 1)
    smp = sample(curve, t)
    local = size_fn(smp.point)
    dens = smp.speed / local
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(t))])
    n = max(16, int(math.ceil(cum[-1] * (1.0 + 1e-9))))
    targets = np.linspace(0.0, cum[-1], n, endpoint=False)
    return np.interp(targets, cum, t)


def _build(curve: BoundaryCurve, h: float, size_fn, lattices) -> Mesh:
    tb = _boundary_params(curve, size_fn, h)
    bpts = curve.points(tb)
    nb = len(bpts)
    ring = shapely.LinearRing(bpts)
    poly = shapely.Polygon(ring)

    interior = []
    for pts in lattices:
        if len(pts) == 0:
            continue
        inside = shapely.contains_xy(poly, pts[:, 0], pts[:, 1])
        pts = pts[inside]
        dist = shapely.distance(shapely.points(pts), ring)
        pts = pts[dist >= BOUNDARY_CLEARANCE * size_fn(pts)]
        interior.append(pts)
    interior = np.vstack(interior) if interior else np.zeros((0, 2))
    nodes = np.vstack([bpts, interior])

    tri = Delaunay(nodes).simplices
    cent = nodes[tri].mean(axis=1)
    keep = shapely.contains_xy(poly, cent[:, 0], cent[:, 1])
    tri = tri[keep]
    # orient counterclockwise
    p = nodes[tri]
    sa = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - \
         (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    tri = np.where((sa < 0)[:, None], tri[:, [0, 2, 1]], tri)
    tri = tri[np.abs(sa) > 1e-14 * h * h]

    used = np.unique(tri)
    if len(used) != len(nodes):
        # drop orphan interior nodes (never boundary ones, checked below)
        remap = -np.ones(len(nodes), dtype=int)
        remap[used] = np.arange(len(used))
        if np.any(remap[:nb] < 0):
            raise MeshingError("boundary node lost during triangulation; use a smaller h")
        nodes = nodes[used]
        tri = remap[tri]

    nodes = _laplacian_smooth(nodes, tri, nb, SMOOTHING_PASSES)

    bedges = np.column_stack([np.arange(nb), np.roll(np.arange(nb), -1)])
    bparams = np.column_stack([tb, np.roll(tb, -1)])
    bparams[-1, 1] += TWO_PI
    d = nodes[bedges[:, 1]] - nodes[bedges[:, 0]]
    blength = np.hypot(d[:, 0], d[:, 1])
    bnormal = np.column_stack([d[:, 1], -d[:, 0]]) / blength[:, None]
    mesh = Mesh(nodes, tri.astype(np.int64), bedges, bparams, blength, bnormal, h)
    check_mesh(mesh)
    return mesh


def _laplacian_smooth(nodes, tri, nb, passes):
    n = len(nodes)
    e = np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    a = sparse.coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n)).tocsr()
    a = ((a + a.T) > 0).astype(float)
    deg = np.asarray(a.sum(axis=1)).ravel()
    nodes = nodes.copy()
    for _ in range(passes):
        avg = (a @ nodes) / deg[:, None]
        trial = nodes.copy()
        trial[nb:] = avg[nb:]
        # Jacobi sweep; keep a node in place if moving it would flip a triangle
        p = trial[tri]
        sa = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - \
             (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
        bad = np.unique(tri[sa <= 0])
        trial[bad] = nodes[bad]
        nodes = trial
    return nodes


def check_mesh(mesh: Mesh) -> None:
    """Raise MeshingError unless every structural invariant holds."""
    if np.any(mesh.areas() <= 0):
        raise MeshingError("non-positive triangle area; use a smaller h")
    e = np.vstack([mesh.triangles[:, [0, 1]], mesh.triangles[:, [1, 2]], mesh.triangles[:, [2, 0]]])
    key, counts = np.unique(np.sort(e, axis=1), axis=0, return_counts=True)
    if np.any(counts > 2):
        raise MeshingError("edge shared by more than two triangles")
    single = {tuple(k) for k in key[counts == 1]}
    loop = {tuple(sorted(b)) for b in mesh.bedges.tolist()}
    if single != loop:
        raise MeshingError("boundary polyline is not conforming; use a smaller h")
    ang = mesh.min_angle()
    if ang < MIN_ANGLE_DEG:
        raise MeshingError(f"minimum angle {ang:.1f} deg below {MIN_ANGLE_DEG} deg; use a smaller h")


def _check_h(curve, h):
    from .geometry import geometric_measures

    if not h > 0:
        raise ValueError("h must be positive")
    perim = geometric_measures(curve)[1]
    if h >= perim / 16:
        raise ValueError(f"h must be below perimeter/16 = {perim / 16:.4g}")


def _bbox(curve):
    pts = curve.points(np.linspace(0.0, TWO_PI, 4096, endpoint=False))
    return pts.min(axis=0), pts.max(axis=0)


def triangulate(curve: BoundaryCurve, h: float) -> Mesh:
    """Triangulate the interior of ``curve`` with target element size ``h``."""
    _check_h(curve, h)
    lo, hi = _bbox(curve)
    lattice = _hex_lattice(lo[0], hi[0], lo[1], hi[1], h)

    def size_fn(pts):
        return np.full(len(np.atleast_2d(pts)), h)

    return _build(curve, h, size_fn, [lattice])


def refine_near(mesh: Mesh, centers, radius: float, curve: BoundaryCurve) -> Mesh:
    """Re-triangulate with size ``h/2`` inside the given disks, ``h`` elsewhere."""
    h = mesh.h
    _check_h(curve, h)
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    lo, hi = _bbox(curve)
    if len(centers) == 0:
        return triangulate(curve, h)
    tree = cKDTree(centers)

    def dist_to_centers(pts):
        return tree.query(np.atleast_2d(pts))[0]

    def size_fn(pts):
        d = dist_to_centers(pts)
        # linear ramp h/2 -> h over one coarse element
        return h * (0.5 + 0.5 * np.clip((d - radius) / h, 0.0, 1.0))

    coarse = _hex_lattice(lo[0], hi[0], lo[1], hi[1], h)
    coarse = coarse[dist_to_centers(coarse) > radius + 0.75 * h]
    fine = _hex_lattice(lo[0], hi[0], lo[1], hi[1], h / 2)
    fine = fine[dist_to_centers(fine) <= radius + 0.25 * h]
    return _build(curve, h, size_fn, [coarse, fine])
