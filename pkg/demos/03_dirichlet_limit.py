"""Robin solutions approach the Dirichlet one as beta grows.

On the disk the torsion gap is exactly 1/(2 beta), so doubling beta halves
the distance.  The ellipse shows the same first-order rate.
"""
from robinlab import solvers
from robinlab.geometry import DomainSpec, make_domain
from robinlab.mesh import triangulate

betas = [10, 20, 40, 80]
for spec, h in ((DomainSpec.disk(), 0.03), (DomainSpec.ellipse(2, 1), 0.04)):
    mesh = triangulate(make_domain(spec), h)
    sweep = solvers.beta_sweep(mesh, "torsion", betas)
    print(spec.label())
    prev = None
    for b, e in zip(sweep.betas, sweep.errors):
        ratio = "" if prev is None else f"  ratio {prev / e:.3f}"
        print(f"  beta={b:<4g} max|u_beta - u_D| = {e:.5f}{ratio}")
        prev = e

# The first eigenvalue increases with beta and stays below the Dirichlet value.
mesh = triangulate(make_domain(DomainSpec.ellipse(2, 1)), 0.05)
sw = solvers.beta_sweep(mesh, "eigen", [0.25, 1, 4, 16, 64])
print("ellipse eigenvalues:", [round(v, 4) for v in sw.eigenvalues], "Dirichlet",
      round(sw.dirichlet_eigenvalue, 4))
