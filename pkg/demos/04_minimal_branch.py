"""Minimal branch of -Lap u = lambda e^u with Robin data.

Picard iteration from a subsolution converges to the minimal solution while
lambda is below the extremal value lambda*; continuation marches lambda and
brackets lambda* by halving the step after each divergent trial.  The
linearized eigenvalue mu1 stays positive and falls towards zero at the fold.
On the unit disk lambda* is known in closed form (2 in the Dirichlet case).
"""
import math

from scipy import optimize

from robinlab import solvers
from robinlab.assembly import Nonlinearity
from robinlab.geometry import DomainSpec, make_domain
from robinlab.mesh import triangulate


def lambda_star(beta):
    def lam(c):
        return 8 * c / (1 + c) ** 2 * math.exp(-4 * c / (beta * (1 + c)))
    return -optimize.minimize_scalar(lambda s: -lam(math.exp(s)), bounds=(-10, 10),
                                     method="bounded").fun


mesh = triangulate(make_domain(DomainSpec.disk()), 0.04)
g = Nonlinearity("gelfand_exp")
for beta in (1.0, 10.0):
    br = solvers.continue_branch(mesh, beta, g)
    lo, hi = br.lambda_star
    print(f"beta={beta:g}: lambda* in [{lo:.4f}, {hi:.4f}], closed form {lambda_star(beta):.4f}")
    for p in br.points:
        print(f"   lambda={p.lam:.4f}  max u={p.field.max():.4f}  mu1={p.mu1:.4f}  "
              f"picard steps={p.picard_iters}")

# Larger beta gives smaller solutions and a larger extremal value.
u1 = solvers.solve_problem(mesh, 1.0, g.with_lam(0.5))
u10 = solvers.solve_problem(mesh, 10.0, g.with_lam(0.5))
uD = solvers.solve_dirichlet(mesh, g.with_lam(0.5))
print("max u at lambda=0.5: beta=1", round(u1.max(), 4), " beta=10", round(u10.max(), 4),
      " Dirichlet", round(uD.max(), 4))
