"""Sparse symmetric solvers: Jacobi-preconditioned CG and inverse iteration.

Matrices are ``scipy.sparse.csr_matrix`` (row offsets ``indptr``, column
``indices``, ``data``); everything here only needs ``A @ x`` and the diagonal.
"""
from __future__ import annotations

import numpy as np
from scipy import sparse


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class EigensolverError(ConvergenceError):
    pass


def as_csr(A) -> sparse.csr_matrix:
    A = sparse.csr_matrix(A, dtype=float)
    A.sum_duplicates()
    A.eliminate_zeros()
    return A


def is_symmetric(A, tol=1e-12) -> bool:
    A = sparse.csr_matrix(A)
    diff = abs(A - A.T)
    scale = max(abs(A).max(), 1.0) if A.nnz else 1.0
    return diff.nnz == 0 or diff.max() <= tol * scale


def cg_solve(A, b, tol=1e-10, maxit=None, x0=None, return_info=False):
    """Solve ``A x = b`` for SPD ``A`` with diagonal preconditioning.

    Stops when ``||A x - b|| <= tol ||b||``; raises ConvergenceError after
    ``maxit`` iterations (default ``10 n``).
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if maxit is None:
        maxit = 10 * n + 10
    d = A.diagonal()
    if np.any(d <= 0):
        raise ConvergenceError("matrix has a non-positive diagonal entry; not SPD")
    dinv = 1.0 / d
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side has non-finite entries")
    # work with b / max|b| so that norms cannot overflow for huge data
    scale = float(np.max(np.abs(b))) if n else 0.0
    if scale == 0.0:
        x = np.zeros(n)
        return (x, 0) if return_info else x
    b = b / scale
    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float) / scale
    r = b - A @ x if x0 is not None else b.copy()
    target = tol * bnorm
    rnorm = np.linalg.norm(r)
    it = 0
    if rnorm <= target:
        x *= scale
        return (x, it) if return_info else x
    z = dinv * r
    p = z.copy()
    rz = r @ z
    while it < maxit:
        it += 1
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            raise ConvergenceError("non-positive curvature in CG; matrix not SPD",
                                   rnorm / bnorm, it)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        rnorm = np.linalg.norm(r)
        if rnorm <= target:
            # guard against drift of the recursive residual
            rtrue = np.linalg.norm(b - A @ x)
            if rtrue <= target:
                x *= scale
                return (x, it) if return_info else x
            r = b - A @ x
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = np.linalg.norm(b - A @ x) / bnorm
    raise ConvergenceError(f"CG did not converge in {maxit} iterations "
                           f"(relative residual {res:.3e})", res, it)


def gershgorin_shift(A, M) -> float:
    """Shift below the spectrum of the pencil ``(A, M)``."""
    inf_norm = abs(A).sum(axis=1).max()
    return -float(inf_norm) / float(M.diagonal().min()) - 1.0


def _tail_bound(dmu):
    """Bound on ``mu - lambda_1`` from the last three Rayleigh-quotient decrements.

    Inverse iteration shrinks the decrement geometrically; when two
    consecutive ratios agree the remaining decrease is the geometric tail.
    Returns ``inf`` while the ratio is not yet steady.
    """
    if len(dmu) < 3 or min(dmu[-3:]) <= 0:
        return np.inf
    r1, r2 = dmu[-1] / dmu[-2], dmu[-2] / dmu[-3]
    if not (0 < r1 < 1) or abs(r1 - r2) > 0.05 * r1:
        return np.inf
    return dmu[-1] * r1 / (1 - r1)


def smallest_eigpair(A, M, tol=1e-10, maxit=500, shift=None, v0=None, cg_tol=None,
                     tighten=True):
    """Smallest eigenpair of ``A v = mu M v`` by shifted inverse iteration.

    ``shift`` must lie below the smallest eigenvalue; the default is the
    Gershgorin bound, which is always safe but can converge slowly.  Callers
    that know a tighter lower bound should pass it.  Converged when the
    Rayleigh quotient moves by at most ``tol (1 + |mu|)`` and the residual
    ``||A v - mu M v||`` is below ``5 tol ||M v||`` (or the inner-solve
    floor).

    Unless ``tighten`` is False the shift is moved up during the iteration:
    the Rayleigh quotient is an upper bound for the smallest eigenvalue and
    its distance to it can be bounded from the decay of its decrements, so
    whenever that bound is below 2% of ``mu - sigma`` the gap is cut by 4
    (never below ``0.1 (1 + |mu|)``).  This keeps the shift below the
    spectrum while fixing the slow rate of a far-away shift or a small
    spectral gap.  Returns ``(mu, v)`` with ``v' M v = 1`` and ``v``
    oriented so its largest-magnitude entry is positive.
    """
    A = sparse.csr_matrix(A)
    M = sparse.csr_matrix(M)
    n = A.shape[0]
    sigma = gershgorin_shift(A, M) if shift is None else float(shift)
    S = (A - sigma * M).tocsr()
    if cg_tol is None:
        cg_tol = min(1e-10, tol)
    v = np.ones(n) if v0 is None else np.array(v0, dtype=float)
    v /= np.sqrt(v @ (M @ v))
    mu_old = None
    dmu = []
    Av = A @ v
    mu = v @ Av
    for it in range(1, maxit + 1):
        try:
            w = cg_solve(S, M @ v, tol=cg_tol, x0=v / max(mu - sigma, 1e-300))
        except ConvergenceError as exc:
            raise EigensolverError(f"inner solve failed: {exc}", exc.residual, it) from exc
        Mw = M @ w
        v = w / np.sqrt(w @ Mw)
        Mv = Mw / np.sqrt(w @ Mw)
        Av = A @ v
        mu = float(v @ Av)
        resid = np.linalg.norm(Av - mu * Mv)
        # inner solves leave a residual of about cg_tol * (mu - sigma) ||Mv||
        rtol = max(5.0 * tol, 10.0 * cg_tol * abs(mu - sigma))
        settled = mu_old is not None and abs(mu - mu_old) <= tol * (1.0 + abs(mu))
        if settled and resid <= rtol * np.linalg.norm(Mv):
            break
        if mu_old is not None:
            dmu.append(mu_old - mu)
        mu_old = mu
        if tighten:
            gap = mu - sigma
            floor = 0.1 * (1.0 + abs(mu))
            bound = 0.0 if settled else _tail_bound(dmu)
            if gap > floor and bound <= 0.02 * gap:
                sigma = mu - max(0.25 * gap, floor)
                S = (A - sigma * M).tocsr()
                dmu = []
    else:
        raise EigensolverError(f"inverse iteration did not converge in {maxit} steps "
                               f"(residual {resid:.3e})", resid, maxit)
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return mu, v
