"""Torsion, first eigenpair and minimal-branch solvers, Robin and Dirichlet.

``beta = math.inf`` selects the Dirichlet problem everywhere in this module
(boundary nodes are eliminated and held at zero).
"""
from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field

import numpy as np

from .assembly import Nonlinearity, Operators
from .linalg import cg_solve, smallest_eigpair
from .mesh import Mesh

CG_TOL = 1e-10
EIG_TOL = 1e-9
PICARD_TOL = 1e-10
PICARD_MAXIT = 500
PICARD_CAP = 1e6

_OPS: "weakref.WeakKeyDictionary[Mesh, Operators]" = weakref.WeakKeyDictionary()


def operators(mesh: Mesh) -> Operators:
    """Assembled K, M, B for ``mesh`` (cached while the mesh is alive)."""
    ops = _OPS.get(mesh)
    if ops is None:
        ops = Operators(mesh)
        _OPS[mesh] = ops
    return ops


class _System:
    """Linear operator of the problem restricted to its free nodes."""

    def __init__(self, mesh: Mesh, beta: float):
        self.beta = beta
        ops = operators(mesh)
        self.ops = ops
        if math.isinf(beta):
            self.free = np.flatnonzero(mesh.interior_mask())
            self.A = ops.K[self.free][:, self.free].tocsr()
            self.M = ops.M[self.free][:, self.free].tocsr()
        else:
            if not beta > 0:
                raise ValueError("beta must be positive")
            self.free = np.arange(mesh.n_nodes)
            self.A = ops.robin(beta)
            self.M = ops.M
        self.n = mesh.n_nodes

    def rhs(self, s):
        return (self.ops.M @ s)[self.free]

    def expand(self, x):
        u = np.zeros(self.n)
        u[self.free] = x
        return u

    def solve(self, s, x0=None):
        """Solve for the field with source ``s`` (nodal values)."""
        x = cg_solve(self.A, self.rhs(s), tol=CG_TOL,
                     x0=None if x0 is None else x0[self.free])
        return self.expand(x)


def _system(mesh, beta) -> _System:
    ops = operators(mesh)
    key = ("system", beta)
    sysm = ops.cache.get(key)
    if sysm is None:
        sysm = _System(mesh, beta)
        ops.cache[key] = sysm
    return sysm


# ---------------------------------------------------------------- torsion

def solve_torsion(mesh: Mesh, beta: float) -> np.ndarray:
    """Nodal solution of ``-Lap u = 1`` with ``du/dn + beta u = 0``."""
    return _system(mesh, beta).solve(np.ones(mesh.n_nodes))


# ---------------------------------------------------------------- eigen

@dataclass
class EigenResult:
    lambda_beta: float
    field: np.ndarray  # max-normalized, positive
    residual: float


def robin_eigenpair(mesh: Mesh, beta: float) -> EigenResult:
    """First eigenpair of ``(K + beta B) v = lam M v``, scaled to ``max v = 1``."""
    ops = operators(mesh)
    key = ("eigen", beta)
    cached = ops.cache.get(key)
    if cached is not None:
        return EigenResult(cached.lambda_beta, cached.field.copy(), cached.residual)
    sysm = _system(mesh, beta)
    # K + beta B is positive semidefinite, so any negative shift is safe
    mu, v = smallest_eigpair(sysm.A, sysm.M, tol=EIG_TOL, shift=-1.0)
    resid = float(np.linalg.norm(sysm.A @ v - mu * (sysm.M @ v)))
    u = sysm.expand(v)
    u /= u.max()
    res = EigenResult(float(mu), u, resid)
    ops.cache[key] = res
    return EigenResult(res.lambda_beta, u.copy(), resid)


def dirichlet_eigenpair(mesh: Mesh) -> EigenResult:
    return robin_eigenpair(mesh, math.inf)


def spectral_scale(mesh: Mesh, beta: float) -> float:
    """First eigenvalue for ``beta``: the natural scale for stability tolerances."""
    return robin_eigenpair(mesh, beta).lambda_beta


# ---------------------------------------------------------------- Picard

@dataclass
class PicardSolution:
    field: np.ndarray
    iterations: int


@dataclass
class Diverged:
    iterations: int
    max_value: float
    reason: str

    def __bool__(self):
        return False


def picard_minimal(mesh: Mesh, beta: float, lam: float, g: Nonlinearity,
                   tol: float = PICARD_TOL, maxit: int = PICARD_MAXIT,
                   cap: float = PICARD_CAP, u0=None):
    """Monotone Picard iteration ``A u_{n+1} = load(lam g(u_n))``.

    Starts from ``u0`` (default 0; any subsolution such as a minimal solution
    at a smaller ``lam`` keeps the iterates monotone and the limit minimal).
    Returns PicardSolution, or Diverged when values exceed ``cap`` or
    ``maxit`` is reached.  CG failures propagate as ConvergenceError.
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    sysm = _system(mesh, beta)
    gl = g.with_lam(lam)
    u = np.zeros(mesh.n_nodes) if u0 is None else np.array(u0, dtype=float)
    for it in range(1, maxit + 1):
        with np.errstate(over="ignore"):
            src = gl.f(u)
        if not np.all(np.isfinite(src)):
            return Diverged(it, float(np.max(u)), "source overflow")
        new = sysm.solve(src, x0=u)
        top = float(np.max(new))
        if not np.isfinite(top) or top > cap:
            return Diverged(it, top, "cap exceeded")
        step = float(np.max(np.abs(new - u)))
        u = new
        if step <= tol * max(1.0, top):
            return PicardSolution(u, it)
    return Diverged(maxit, float(np.max(u)), "iteration limit reached")


# ---------------------------------------------------------------- branch

@dataclass
class BranchPoint:
    lam: float
    field: np.ndarray
    picard_iters: int
    mu1: float
    stable: bool


@dataclass
class StepPolicy:
    """Continuation controls.

    ``initial`` defaults to an eighth of ``lambda_beta / g(0)``.  The step is
    halved after every divergent trial; marching stops once the bracket
    ``[largest convergent, smallest divergent]`` has relative width
    ``rel_width``.
    """

    initial: float | None = None
    rel_width: float = 0.01
    max_trials: int = 200
    stability: bool = True


@dataclass
class Branch:
    beta: float
    g: Nonlinearity
    points: list = field(default_factory=list)
    lambda_star: tuple = (0.0, math.inf)

    @property
    def lambdas(self):
        return np.array([p.lam for p in self.points])

    @property
    def mu1(self):
        return np.array([p.mu1 for p in self.points])

    def bracket_width(self) -> float:
        lo, hi = self.lambda_star
        return (hi - lo) / lo if lo > 0 else math.inf


def continue_branch(mesh: Mesh, beta: float, g: Nonlinearity,
                    policy: StepPolicy | None = None) -> Branch:
    """March the minimal branch in ``lam`` and bracket the extremal value."""
    from .stability import linearized_mu1

    policy = policy or StepPolicy()
    scale = spectral_scale(mesh, beta)
    step = policy.initial
    if step is None:
        step = 0.125 * scale / float(g.g(0.0))
    branch = Branch(beta, g)
    lam_ok, lam_bad = 0.0, math.inf
    u_ok = np.zeros(mesh.n_nodes)
    for _ in range(policy.max_trials):
        if lam_ok > 0 and lam_bad - lam_ok <= policy.rel_width * lam_ok:
            break
        lam = lam_ok + step
        if lam >= lam_bad:
            step = 0.5 * (lam_bad - lam_ok)
            lam = lam_ok + step
        res = picard_minimal(mesh, beta, lam, g, u0=u_ok)
        if isinstance(res, Diverged):
            lam_bad = lam
            step *= 0.5
            continue
        if policy.stability:
            mu1, _ = linearized_mu1(mesh, beta, res.field, g.with_lam(lam), scale=scale)
            stable = mu1 >= -1e-8 * scale
        else:
            mu1, stable = math.nan, True
        branch.points.append(BranchPoint(lam, res.field, res.iterations, mu1, stable))
        lam_ok, u_ok = lam, res.field
    branch.lambda_star = (lam_ok, lam_bad)
    return branch


# ---------------------------------------------------------------- Dirichlet

def _as_problem(problem):
    if isinstance(problem, Nonlinearity):
        return problem
    if problem == "torsion":
        return Nonlinearity("torsion")
    if problem == "eigen":
        return "eigen"
    raise ValueError(f"unknown problem {problem!r}")


def solve_problem(mesh: Mesh, beta: float, problem):
    """Solve ``problem`` (``"torsion"``, ``"eigen"`` or a Nonlinearity).

    Eigen solutions are max-normalized.  Returns the nodal field, or a
    Diverged record for a nonlinear problem above its extremal value.
    """
    problem = _as_problem(problem)
    if problem == "eigen":
        return robin_eigenpair(mesh, beta).field
    if problem.kind == "torsion":
        return problem.lam * solve_torsion(mesh, beta)
    res = picard_minimal(mesh, beta, problem.lam, problem)
    return res.field if isinstance(res, PicardSolution) else res


def solve_dirichlet(mesh: Mesh, problem):
    """Same as :func:`solve_problem` with ``u = 0`` imposed on the boundary."""
    return solve_problem(mesh, math.inf, problem)


def effective_nonlinearity(mesh: Mesh, beta: float, problem) -> Nonlinearity:
    """The ``f`` of the PDE actually solved (``lambda_beta t`` for eigen)."""
    problem = _as_problem(problem)
    if problem == "eigen":
        return Nonlinearity("linear", robin_eigenpair(mesh, beta).lambda_beta)
    return problem


@dataclass
class SweepResult:
    betas: list
    fields: list
    dirichlet: np.ndarray
    errors: list  # max-norm distance to the Dirichlet field
    eigenvalues: list | None = None
    dirichlet_eigenvalue: float | None = None


def beta_sweep(mesh: Mesh, problem, betas) -> SweepResult:
    betas = [float(b) for b in betas]
    if not betas or any(b <= 0 for b in betas) or any(np.diff(betas) <= 0):
        raise ValueError("beta grid must be positive and strictly increasing")
    uD = solve_dirichlet(mesh, problem)
    if isinstance(uD, Diverged):
        raise RuntimeError(f"Dirichlet problem diverged: {uD.reason}")
    fields, errors = [], []
    for b in betas:
        u = solve_problem(mesh, b, problem)
        if isinstance(u, Diverged):
            raise RuntimeError(f"problem diverged at beta={b}: {u.reason}")
        fields.append(u)
        errors.append(float(np.max(np.abs(u - uD))))
    out = SweepResult(betas, fields, uD, errors)
    if _as_problem(problem) == "eigen":
        out.eigenvalues = [robin_eigenpair(mesh, b).lambda_beta for b in betas]
        out.dirichlet_eigenvalue = dirichlet_eigenpair(mesh).lambda_beta
    return out


def comparison_bound(mesh: Mesh, beta: float, g: Nonlinearity, lam: float, u=None):
    """Check ``u <= v`` where ``-Lap v = sup f(u)`` with the same boundary condition.

    ``u`` defaults to the minimal solution at ``lam``.  Returns
    ``(ok, u, v)``; ``ok`` is False also when ``u`` cannot be computed.
    """
    gl = g.with_lam(lam)
    if u is None:
        if lam == 0:
            u = np.zeros(mesh.n_nodes)
        else:
            res = picard_minimal(mesh, beta, lam, g)
            if isinstance(res, Diverged):
                return False, None, None
            u = res.field
    top = float(np.max(gl.f(np.array([0.0, np.max(u)]))))
    v = top * solve_torsion(mesh, beta)
    return bool(np.all(u <= v + 1e-8)), u, v
