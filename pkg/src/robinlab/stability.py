"""Linearized stability and the boundary-integral instability test."""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from .assembly import Nonlinearity, weighted_mass
from .geometry import BoundaryCurve, sample
from .linalg import smallest_eigpair
from .mesh import Mesh
from .solvers import EIG_TOL, _system, spectral_scale

STABLE_RTOL = 1e-8


@dataclass
class StabilityReport:
    mu1: float
    eigfield: np.ndarray
    bmmp_integral: float
    bmmp_condition2: bool
    unstable_flag: bool
    scale: float

    @property
    def stable(self) -> bool:
        return self.mu1 >= -STABLE_RTOL * self.scale

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("eigfield")
        d["stable"] = self.stable
        return d


def linearized_mu1(mesh: Mesh, beta: float, u, g: Nonlinearity, scale=None):
    """Smallest eigenvalue of ``K + beta B - W(f'(u))`` against the mass matrix.

    Returns ``(mu1, phi)`` with ``phi`` M-normalized and extended by zero on
    the boundary for the Dirichlet case (``beta = inf``).
    """
    sysm = _system(mesh, beta)
    w = g.df(np.asarray(u, dtype=float))
    W = weighted_mass(mesh, w)
    if math.isinf(beta):
        W = W[sysm.free][:, sysm.free]
    A = (sysm.A - W).tocsr()
    # A - sigma M >= K + beta B + M when sigma = -(max w + 1)
    shift = -(max(float(np.max(w)), 0.0) + 1.0)
    mu, v = smallest_eigpair(A, sysm.M, tol=EIG_TOL, shift=shift)
    return float(mu), sysm.expand(v)


def quadratic_form(mesh: Mesh, beta: float, u, g: Nonlinearity, phi) -> float:
    """``int |grad phi|^2 + beta int_bd phi^2 - int f'(u) phi^2`` (discrete)."""
    sysm = _system(mesh, beta)
    W = weighted_mass(mesh, g.df(np.asarray(u, dtype=float)))
    phi = np.asarray(phi, dtype=float)
    if math.isinf(beta):
        A = sysm.ops.K
    else:
        A = sysm.A
    return float(phi @ (A @ phi) - phi @ (W @ phi))


def bmmp_check(mesh: Mesh, curve: BoundaryCurve, beta: float, u, g: Nonlinearity):
    """Boundary integral of ``beta^2 u^2 (beta - kappa + f(u)/(beta u))``.

    Midpoint rule over the boundary edges, curvature from the analytic curve.
    Returns ``(integral, condition2, unstable_flag)`` where condition2 is
    ``beta + min kappa >= 0`` and the flag is their conjunction with a
    negative integral.
    """
    u = np.asarray(u, dtype=float)
    ub = 0.5 * (u[mesh.bedges[:, 0]] + u[mesh.bedges[:, 1]])
    if np.any(ub <= 0):
        raise ValueError("solution is not positive on the boundary")
    tm = 0.5 * (mesh.bparams[:, 0] + mesh.bparams[:, 1])
    kappa = sample(curve, tm).kappa
    integrand = beta**2 * ub**2 * (beta - kappa + g.f(ub) / (beta * ub))
    integral = float(np.sum(integrand * mesh.blength))
    dense = np.linspace(0.0, 2 * math.pi, 4096, endpoint=False)
    kmin = float(np.min(sample(curve, dense).kappa))
    cond2 = beta + kmin >= 0
    return integral, bool(cond2), bool(cond2 and integral < 0)


def stability_report(mesh: Mesh, curve: BoundaryCurve, beta: float, u, g: Nonlinearity,
                     scale=None) -> StabilityReport:
    if scale is None:
        scale = spectral_scale(mesh, beta)
    mu1, phi = linearized_mu1(mesh, beta, u, g, scale=scale)
    integral, cond2, flag = bmmp_check(mesh, curve, beta, u, g)
    return StabilityReport(mu1, phi, integral, cond2, flag, scale)
