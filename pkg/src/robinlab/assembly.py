"""P1 finite-element matrices and the nonlinearities used by the solvers."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .mesh import Mesh


@dataclass(frozen=True)
class Nonlinearity:
    """Right-hand side ``f(t) = lam * g(t)``.

    kinds: ``torsion`` (g = 1), ``gelfand_exp`` (g = e^t), ``power_p``
    (g = (1+t)^p) and ``linear`` (g = t, the eigenfunction problem).
    """

    kind: str
    lam: float = 1.0
    p: float = 2.0

    def __post_init__(self):
        if self.kind not in ("torsion", "gelfand_exp", "power_p", "linear"):
            raise ValueError(f"unknown nonlinearity {self.kind!r}")
        if self.lam < 0:
            raise ValueError("scale lam must be >= 0")
        if self.kind == "power_p" and not self.p > 0:
            raise ValueError("power_p needs p > 0")

    def with_lam(self, lam):
        return Nonlinearity(self.kind, lam, self.p)

    def g(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "torsion":
            return np.ones_like(t)
        if self.kind == "gelfand_exp":
            return np.exp(t)
        if self.kind == "power_p":
            return (1.0 + t) ** self.p
        return t

    def dg(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "torsion":
            return np.zeros_like(t)
        if self.kind == "gelfand_exp":
            return np.exp(t)
        if self.kind == "power_p":
            return self.p * (1.0 + t) ** (self.p - 1.0)
        return np.ones_like(t)

    def f(self, t):
        return self.lam * self.g(t)

    def df(self, t):
        return self.lam * self.dg(t)


def _grad_basis(mesh: Mesh):
    """Constant gradients of the three hat functions on every triangle."""
    p = mesh.nodes[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    area2 = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    # grad phi_i = (y_j - y_k, x_k - x_j) / (2A), (i, j, k) cyclic
    gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1) / area2[:, None]
    gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1) / area2[:, None]
    return gx, gy, 0.5 * area2


def _scatter(mesh, local):
    t = mesh.triangles
    rows = np.repeat(t, 3, axis=1).ravel()
    cols = np.tile(t, (1, 3)).ravel()
    n = mesh.n_nodes
    A = sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    A.sum_duplicates()
    return A


def stiffness(mesh: Mesh) -> sparse.csr_matrix:
    gx, gy, area = _grad_basis(mesh)
    local = (gx[:, :, None] * gx[:, None, :] + gy[:, :, None] * gy[:, None, :]) * area[:, None, None]
    return _scatter(mesh, local)


_MASS_REF = (np.ones((3, 3)) + np.eye(3)) / 12.0


def interior_mass(mesh: Mesh) -> sparse.csr_matrix:
    area = mesh.areas()
    return _scatter(mesh, area[:, None, None] * _MASS_REF[None])


def _triple_products():
    # int phi_i phi_j phi_k / area on a triangle: 1/10, 1/30 or 1/60
    c = np.zeros((3, 3, 3))
    for i in range(3):
        for j in range(3):
            for k in range(3):
                m = len({i, j, k})
                c[i, j, k] = {1: 1 / 10, 2: 1 / 30, 3: 1 / 60}[m]
    return c


_TRIPLE = _triple_products()


def weighted_mass(mesh: Mesh, w) -> sparse.csr_matrix:
    """Entries ``int w phi_i phi_j`` with ``w`` piecewise linear, exact."""
    w = np.asarray(w, dtype=float)
    wl = w[mesh.triangles]
    local = np.einsum("ijk,ek->eij", _TRIPLE, wl) * mesh.areas()[:, None, None]
    return _scatter(mesh, local)


def boundary_mass(mesh: Mesh) -> sparse.csr_matrix:
    e = mesh.bedges
    ell = mesh.blength
    rows = np.concatenate([e[:, 0], e[:, 0], e[:, 1], e[:, 1]])
    cols = np.concatenate([e[:, 0], e[:, 1], e[:, 0], e[:, 1]])
    vals = np.concatenate([ell / 3, ell / 6, ell / 6, ell / 3])
    n = mesh.n_nodes
    B = sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    B.sum_duplicates()
    return B


def load(mesh: Mesh, s, mass=None) -> np.ndarray:
    """Vector ``int s phi_i`` for piecewise-linear ``s``."""
    if mass is None:
        mass = interior_mass(mesh)
    return mass @ np.asarray(s, dtype=float)


class Operators:
    """Cached K, M, B for one mesh (holds no reference to the mesh itself)."""

    def __init__(self, mesh: Mesh):
        self.K = stiffness(mesh)
        self.M = interior_mass(mesh)
        self.B = boundary_mass(mesh)
        self._robin = {}
        self.cache = {}  # solver-level results keyed by (kind, beta)

    def robin(self, beta: float) -> sparse.csr_matrix:
        """``K + beta B`` (``beta = inf`` not allowed here)."""
        if not math.isfinite(beta):
            raise ValueError("beta must be finite for the Robin operator")
        A = self._robin.get(beta)
        if A is None:
            A = (self.K + beta * self.B).tocsr()
            self._robin[beta] = A
        return A

    def load(self, s):
        return self.M @ np.asarray(s, dtype=float)
