import math

import numpy as np
import pytest

from robinlab import solvers
from robinlab.assembly import Nonlinearity
from robinlab.mesh import triangulate
from oracles import J01, gelfand_lambda_star, gelfand_profile, robin_disk_eigenvalue, torsion_disk

GELFAND = Nonlinearity("gelfand_exp")


def test_torsion_disk(disk_mesh_fine):
    m = disk_mesh_fine
    for beta in (1.0, 10.0):
        u = solvers.solve_torsion(m, beta)
        assert u.max() == pytest.approx(0.25 + 0.5 / beta, rel=5e-3)
        assert np.allclose(u[m.boundary_nodes], 0.5 / beta, rtol=1e-2)
        r = np.linalg.norm(m.nodes, axis=1)
        assert np.max(np.abs(u - torsion_disk(r, beta))) < 2e-3


def test_torsion_convergence_order(disk):
    errs = []
    for h in (0.1, 0.05, 0.025):
        m = triangulate(disk, h)
        u = solvers.solve_torsion(m, 2.0)
        errs.append(np.max(np.abs(u - torsion_disk(np.linalg.norm(m.nodes, axis=1), 2.0))))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.8), orders


def test_dirichlet_torsion(disk_mesh_fine, ellipse):
    assert solvers.solve_dirichlet(disk_mesh_fine, "torsion").max() == pytest.approx(0.25, rel=5e-3)
    m = triangulate(ellipse, 0.04)
    u = solvers.solve_dirichlet(m, "torsion")
    assert u.max() == pytest.approx(0.4, rel=1e-2)
    assert np.linalg.norm(m.nodes[np.argmax(u)]) < 0.1
    assert np.all(u[m.boundary_nodes] == 0)


@pytest.mark.parametrize("beta", [1.0, 10.0, 1e4])
def test_robin_eigen_bessel(disk_mesh_fine, beta):
    res = solvers.robin_eigenpair(disk_mesh_fine, beta)
    assert res.lambda_beta == pytest.approx(robin_disk_eigenvalue(beta), rel=1e-2)
    assert res.field.max() == pytest.approx(1.0) and res.field.min() > 0


def test_eigen_large_beta_and_dirichlet(disk_mesh_fine):
    assert solvers.robin_eigenpair(disk_mesh_fine, 1e4).lambda_beta == pytest.approx(J01**2, rel=1e-2)
    assert solvers.dirichlet_eigenpair(disk_mesh_fine).lambda_beta == pytest.approx(J01**2, rel=1e-2)


def test_small_beta_ratio(disk_mesh_fine):
    lam = solvers.robin_eigenpair(disk_mesh_fine, 1e-3).lambda_beta
    assert lam / 1e-3 == pytest.approx(2.0, rel=2e-2)


def test_picard_torsion_two_steps(disk_mesh):
    res = solvers.picard_minimal(disk_mesh, 1.0, 2.5, Nonlinearity("torsion"))
    assert isinstance(res, solvers.PicardSolution) and res.iterations == 2
    assert np.allclose(res.field, 2.5 * solvers.solve_torsion(disk_mesh, 1.0))


def test_picard_gelfand(disk_mesh_fine):
    res = solvers.picard_minimal(disk_mesh_fine, 1.0, 0.2, GELFAND)
    assert isinstance(res, solvers.PicardSolution) and np.isfinite(res.field.max())
    # closed-form profile on the lower (minimal) branch at the same lambda
    from scipy import optimize
    from oracles import gelfand_lambda_of_c
    c = optimize.brentq(lambda c: gelfand_lambda_of_c(c, 1.0) - 0.2, 1e-9, 1.0)
    lam, prof = gelfand_profile(c, 1.0)
    assert res.field.max() == pytest.approx(prof(0.0), rel=5e-3)
    assert not solvers.picard_minimal(disk_mesh_fine, 1.0, 10.0, GELFAND)


def test_picard_diverged_reports(disk_mesh):
    d = solvers.picard_minimal(disk_mesh, 1.0, 10.0, GELFAND)
    assert isinstance(d, solvers.Diverged) and d.reason
    with pytest.raises(ValueError):
        solvers.picard_minimal(disk_mesh, 1.0, -1.0, GELFAND)


def test_branch_large_beta(disk):
    m = triangulate(disk, 0.05)
    br = solvers.continue_branch(m, 1e4, GELFAND, solvers.StepPolicy(stability=False))
    lo, hi = br.lambda_star
    assert br.bracket_width() <= 0.01
    assert 0.5 * (lo + hi) == pytest.approx(2.0, rel=0.1)
    assert np.all(np.diff(br.lambdas) > 0)


def test_branch_power(disk):
    m = triangulate(disk, 0.08)
    br = solvers.continue_branch(m, 1.0, Nonlinearity("power_p", 1.0, 2.0))
    lo, hi = br.lambda_star
    assert math.isfinite(hi) and lo > 0
    scale = solvers.spectral_scale(m, 1.0)
    assert np.all(br.mu1 >= -1e-8 * scale)


def test_minimal_branch_monotone_in_lambda(disk_mesh):
    lams = [0.05, 0.1, 0.2]
    us = [solvers.picard_minimal(disk_mesh, 1.0, lam, GELFAND).field for lam in lams]
    for a, b in zip(us, us[1:]):
        assert np.all(b >= a - 1e-10)


def test_sweep_torsion(disk_mesh_fine):
    sw = solvers.beta_sweep(disk_mesh_fine, "torsion", [10, 20, 40, 80])
    assert np.all(np.diff(sw.errors) < 0)
    for b, e in zip(sw.betas, sw.errors):
        assert e == pytest.approx(1 / (2 * b), rel=0.1)
    for a, b in zip(sw.fields, sw.fields[1:]):
        assert np.all(b <= a + 1e-8)
    assert np.all(sw.dirichlet <= sw.fields[-1] + 1e-8)


def test_sweep_eigen(disk_mesh):
    sw = solvers.beta_sweep(disk_mesh, "eigen", [0.5, 2, 8, 32])
    assert np.all(np.diff(sw.eigenvalues) > 0)
    assert sw.eigenvalues[-1] <= sw.dirichlet_eigenvalue


def test_sweep_validation(disk_mesh):
    for bad in ([], [1, 1], [2, 1], [-1, 2]):
        with pytest.raises(ValueError):
            solvers.beta_sweep(disk_mesh, "torsion", bad)


def test_positivity_of_solutions(ellipse_mesh):
    for problem in ("torsion", "eigen", GELFAND.with_lam(0.1)):
        for beta in (0.25, 4.0, 64.0):
            u = solvers.solve_problem(ellipse_mesh, beta, problem)
            assert u.min() > 0


def test_comparison_bound(disk_mesh):
    ok, u, v = solvers.comparison_bound(disk_mesh, 1.0, Nonlinearity("torsion"), 1.0)
    assert ok and np.allclose(u, v, atol=1e-10)
    ok, u, v = solvers.comparison_bound(disk_mesh, 1.0, GELFAND, 0.2)
    assert ok and np.all(u < v)
    ok, u, v = solvers.comparison_bound(disk_mesh, 1.0, GELFAND, 0.0)
    assert ok and not np.any(u)


def test_oracle_cross_check():
    # the numeric lambda* oracle used throughout
    assert gelfand_lambda_star(math.inf) == pytest.approx(2.0, abs=1e-9)


def test_picard_no_false_convergence_above_extremal(disk):
    # just above lambda* the iterates grow to where e^u is near overflow;
    # that must be reported as divergence, never as a converged field
    m = triangulate(disk, 0.05)
    lam_star = gelfand_lambda_star(64.0)
    res = solvers.picard_minimal(m, 64.0, 1.09 * lam_star, GELFAND)
    assert isinstance(res, solvers.Diverged)
    br = solvers.continue_branch(m, 64.0, GELFAND, solvers.StepPolicy(stability=False))
    lo, hi = br.lambda_star
    assert lo <= lam_star * 1.01 and hi >= lam_star * 0.99
