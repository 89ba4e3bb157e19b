"""Torsion function and first Robin eigenpair on the unit disk.

On the unit disk the torsion function is (1 - r^2)/4 + 1/(2 beta), and the
first eigenvalue solves sqrt(l) J1(sqrt(l)) = beta J0(sqrt(l)).  Both are
reproduced to a few parts in 10^4 at h = 0.03.
"""
import numpy as np
from scipy import optimize, special

from robinlab import solvers
from robinlab.geometry import DomainSpec, make_domain
from robinlab.mesh import triangulate

mesh = triangulate(make_domain(DomainSpec.disk()), 0.03)
print(f"{mesh.n_nodes} nodes")

for beta in (0.5, 1.0, 10.0):
    u = solvers.solve_torsion(mesh, beta)
    exact = 0.25 + 0.5 / beta
    print(f"torsion beta={beta:<5} max u = {u.max():.6f} (exact {exact:.6f})")

j01 = special.jn_zeros(0, 1)[0]
for beta in (1e-3, 1.0, 10.0, 1e4):
    k = optimize.brentq(lambda k: k * special.j1(k) - beta * special.j0(k), 1e-12, j01 - 1e-12)
    lam = solvers.robin_eigenpair(mesh, beta).lambda_beta
    print(f"eigen beta={beta:<7g} lambda_h = {lam:.6f}  Bessel {k * k:.6f}  lambda/beta = {lam / beta:.4f}")

# For small beta the ratio lambda/beta tends to perimeter/area (2 on the unit disk);
# for large beta lambda tends to the Dirichlet value j01^2.
print(f"Dirichlet: {solvers.dirichlet_eigenpair(mesh).lambda_beta:.6f} vs j01^2 = {j01 ** 2:.6f}")
