"""Critical points of P1 fields: gradient recovery, census, index sums."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .geometry import BoundaryCurve, sample
from .mesh import Mesh, refine_near

TOL_DEG = 1e-3
WINDING_RESIDUE_MAX = 0.2
MAX_ADAPTIVE_PASSES = 3


class UnresolvedCensusError(RuntimeError):
    pass


class WindingError(RuntimeError):
    pass


@dataclass
class CriticalPoint:
    position: np.ndarray
    value: float
    grad_residual: float
    hessian: np.ndarray
    kind: str
    index: int

    def to_json(self) -> dict:
        return {
            "x": float(self.position[0]),
            "y": float(self.position[1]),
            "value": float(self.value),
            "grad_residual": float(self.grad_residual),
            "hessian": [[float(v) for v in row] for row in self.hessian],
            "kind": self.kind,
            "index": int(self.index),
        }


@dataclass
class CritCensus:
    points: list
    index_sum: int
    boundary_winding: int
    hopf_ok: bool
    winding_residue: float = 0.0
    degenerate: bool = False
    passes: int = 1
    flags: list = field(default_factory=list)

    def counts(self) -> Counter:
        return Counter(p.kind for p in self.points)

    def signature(self) -> tuple:
        c = self.counts()
        return tuple(sorted(c.items()))

    @property
    def n_max(self) -> int:
        return self.counts().get("max", 0)

    @property
    def n_saddle(self) -> int:
        return self.counts().get("saddle", 0)

    def to_json(self) -> dict:
        c = self.counts()
        return {
            "points": [p.to_json() for p in self.points],
            "n_max": c.get("max", 0),
            "n_saddle": c.get("saddle", 0),
            "n_min": c.get("min", 0),
            "n_degenerate": c.get("degenerate", 0),
            "index_sum": int(self.index_sum),
            "boundary_winding": int(self.boundary_winding),
            "winding_residue": float(self.winding_residue),
            "hopf_ok": bool(self.hopf_ok),
            "degenerate": bool(self.degenerate),
            "passes": int(self.passes),
            "flags": list(self.flags),
        }


def element_gradients(mesh: Mesh, u) -> np.ndarray:
    p = mesh.nodes[mesh.triangles]
    uu = np.asarray(u, dtype=float)[mesh.triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    du1 = uu[:, 1] - uu[:, 0]
    du2 = uu[:, 2] - uu[:, 0]
    gx = (du1 * d2[:, 1] - du2 * d1[:, 1]) / det
    gy = (du2 * d1[:, 0] - du1 * d2[:, 0]) / det
    return np.column_stack([gx, gy])


def recover_gradient(mesh: Mesh, u) -> np.ndarray:
    """Nodal gradient: area-weighted mean of the element gradients around each node."""
    ge = element_gradients(mesh, u)
    area = mesh.areas()
    n = mesh.n_nodes
    t = mesh.triangles
    rows = t.ravel()
    cols = np.repeat(np.arange(len(t)), 3)
    P = sparse.coo_matrix((np.repeat(area, 3), (rows, cols)), shape=(n, len(t))).tocsr()
    wsum = np.asarray(P.sum(axis=1)).ravel()
    return (P @ ge) / wsum[:, None]


def classify(hessian, tol_deg: float = TOL_DEG):
    """Kind and index from a symmetric 2x2 Hessian."""
    ev = np.linalg.eigvalsh(np.asarray(hessian, dtype=float))
    det = ev[0] * ev[1]
    scale = (abs(ev[0]) + abs(ev[1])) ** 2 / 4.0
    if scale == 0.0 or abs(det) < tol_deg * scale:
        return "degenerate", 0
    if det < 0:
        return "saddle", -1
    return ("max", 1) if ev[1] < 0 else ("min", 1)


def _quadratic_fit(pts, vals, center, h):
    d = (pts - center) / h
    x, y = d[:, 0], d[:, 1]
    V = np.column_stack([np.ones_like(x), x, y, x * x, x * y, y * y])
    coef, *_ = np.linalg.lstsq(V, vals, rcond=None)
    c0, c1, c2, c3, c4, c5 = coef
    grad = np.array([c1, c2]) / h
    hess = np.array([[2 * c3, c4], [c4, 2 * c5]]) / h**2
    return c0, grad, hess


class _Patches:
    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        adj = mesh.adjacency()
        self.adj2 = ((adj + adj @ adj + sparse.eye(mesh.n_nodes)) > 0).tocsr()

    def nodes_around(self, tri_nodes):
        rows = self.adj2[tri_nodes]
        return np.unique(rows.indices)


def _candidate_triangles(mesh: Mesh, grad) -> np.ndarray:
    gt = grad[mesh.triangles]  # (ntri, 3, 2)
    lo = gt.min(axis=1)
    hi = gt.max(axis=1)
    both = np.all((lo <= 0) & (hi >= 0), axis=1)
    return np.flatnonzero(both)


def locate_critical_points(mesh: Mesh, u, curve: BoundaryCurve | None = None,
                           tol_deg: float = TOL_DEG, max_polish: int = 8) -> list:
    """Find, polish and classify the critical points of the P1 field ``u``.

    Candidates are triangles where both recovered-gradient components change
    sign; each is polished by Newton steps on least-squares quadratic fits
    over 2-ring node patches.  Points that leave the domain or drift away from
    where they started are dropped; survivors closer than ``2h`` are merged.
    """
    u = np.asarray(u, dtype=float)
    h = mesh.h
    grad = recover_gradient(mesh, u)
    cands = _candidate_triangles(mesh, grad)
    if len(cands) == 0:
        return []
    loc = mesh.locator()
    patches = _Patches(mesh)
    found = []
    for tri in cands:
        start = mesh.nodes[mesh.triangles[tri]].mean(axis=0)
        x = start.copy()
        current = tri
        ok = False
        for _ in range(max_polish):
            nodes = patches.nodes_around(mesh.triangles[current])
            c0, gfit, hfit = _quadratic_fit(mesh.nodes[nodes], u[nodes], x, h)
            try:
                step = -np.linalg.solve(hfit, gfit)
            except np.linalg.LinAlgError:
                break
            x = x + step
            t_new, _ = loc.locate(x[None])
            if t_new[0] < 0:
                break
            current = int(t_new[0])
            if np.linalg.norm(step) <= 1e-6 * h:
                ok = True
                break
        if not ok or np.linalg.norm(x - start) > 2.0 * h:
            continue
        nodes = patches.nodes_around(mesh.triangles[current])
        value, gfit, hess = _quadratic_fit(mesh.nodes[nodes], u[nodes], x, h)
        gres = float(np.linalg.norm(loc.interpolate(grad, x[None])[0]))
        kind, index = classify(hess, tol_deg)
        found.append(CriticalPoint(x, float(value), gres, hess, kind, index))

    # merge duplicates, keeping the smallest recovered-gradient residual
    found.sort(key=lambda p: p.grad_residual)
    kept = []
    for p in found:
        if all(np.linalg.norm(p.position - q.position) >= 2.0 * h for q in kept):
            kept.append(p)
    kept.sort(key=lambda p: (p.position[0], p.position[1]))
    return kept


def boundary_winding(mesh: Mesh, u, curve: BoundaryCurve | None = None, grad=None):
    """Turns of the recovered gradient along a loop one layer inside the boundary.

    The loop consists of the boundary nodes pulled inward along the polygon
    vertex normal by ``sqrt(3)/2 h``.  Returns ``(winding, residue)``; raises
    WindingError if the total angle is not close to a multiple of ``2 pi``.
    """
    if grad is None:
        grad = recover_gradient(mesh, u)
    bn = mesh.boundary_nodes
    nrm = mesh.bnormal + np.roll(mesh.bnormal, 1, axis=0)
    nrm /= np.linalg.norm(nrm, axis=1)[:, None]
    pts = mesh.nodes[bn] - (math.sqrt(3.0) / 2.0) * mesh.h * nrm
    gl = mesh.locator().interpolate(grad, pts)
    if np.any(~np.isfinite(gl)):
        raise WindingError("inner loop leaves the mesh; refine")
    if np.any(np.linalg.norm(gl, axis=1) == 0):
        raise WindingError("gradient vanishes on the inner loop")
    ang = np.arctan2(gl[:, 1], gl[:, 0])
    dang = np.angle(np.exp(1j * (np.roll(ang, -1) - ang)))
    turns = float(np.sum(dang) / (2 * math.pi))
    w = int(round(turns))
    residue = turns - w
    if abs(residue) > WINDING_RESIDUE_MAX:
        raise WindingError(f"ill-conditioned winding (residue {residue:.3f}); refine the mesh")
    return w, residue


def hopf_sign_check(mesh: Mesh, u, beta: float) -> bool:
    """``u > 0`` everywhere and ``du/dn = -beta u < 0`` on the boundary."""
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)) or np.min(u) <= 0:
        return False
    return bool(np.max(-beta * u[mesh.boundary_nodes]) < 0)


def census(mesh: Mesh, u, curve: BoundaryCurve, beta: float, resolve=None,
           refine_radius: float | None = None, tol_deg: float = TOL_DEG) -> CritCensus:
    """Critical-point census with index sum, winding number and Hopf check.

    ``resolve(mesh) -> field`` enables the adaptive pass: the mesh is refined
    to ``h/2`` around the points found, the problem re-solved, and the census
    repeated until two consecutive passes agree.
    """
    points = locate_critical_points(mesh, u, curve, tol_deg)
    passes = 1
    if resolve is not None:
        radius = refine_radius if refine_radius is not None else 4.0 * mesh.h
        prev = _signature(points)
        for _ in range(MAX_ADAPTIVE_PASSES):
            centers = [p.position for p in points]
            fine = refine_near(mesh, centers, radius, curve)
            v = resolve(fine)
            new = locate_critical_points(fine, v, curve, tol_deg)
            passes += 1
            if _signature(new) == prev:
                break
            points, prev = new, _signature(new)
        else:
            raise UnresolvedCensusError(
                f"census changed on every one of {MAX_ADAPTIVE_PASSES} adaptive passes")
    grad = recover_gradient(mesh, u)
    w, residue = boundary_winding(mesh, u, curve, grad=grad)
    flags = []
    degenerate = any(p.kind == "degenerate" for p in points)
    if degenerate:
        flags.append("degenerate")
    if any(p.kind == "min" for p in points):
        flags.append("interior_min")
    return CritCensus(points, int(sum(p.index for p in points)), w,
                      hopf_sign_check(mesh, u, beta) if math.isfinite(beta) else True,
                      residue, degenerate, passes, flags)


def _signature(points):
    return tuple(sorted(Counter(p.kind for p in points).items()))
