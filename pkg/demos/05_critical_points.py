"""Critical points, index sums and what convexity buys.

On convex domains the stable solutions have a single nondegenerate maximum.
The corrugated stadium is only slightly nonconvex, yet at beta = 100 its
torsion function has a maximum under each bump, separated by saddles.  In
both cases the indices add up to the boundary winding number of the
gradient, which is 1 on a simply connected domain.
"""
from robinlab import solvers
from robinlab.critpoints import census
from robinlab.geometry import DomainSpec, make_domain
from robinlab.mesh import triangulate

cases = [(DomainSpec.ellipse(2, 1), 0.05, "eigen", 4.0),
         (DomainSpec.ellipse(2, 1), 0.05, "torsion", 64.0),
         (DomainSpec.corrugated_strip(), 0.05, "torsion", 100.0)]
for spec, h, problem, beta in cases:
    curve = make_domain(spec)
    mesh = triangulate(curve, h)
    u = solvers.solve_problem(mesh, beta, problem)
    cs = census(mesh, u, curve, beta)
    print(f"{spec.label()} {problem} beta={beta:g}: {dict(cs.counts())}, "
          f"index sum {cs.index_sum}, winding {cs.boundary_winding}, Hopf sign ok {cs.hopf_ok}")
    for p in cs.points:
        print(f"    {p.kind:7s} at ({p.position[0]:+.3f}, {p.position[1]:+.3f})  u={p.value:.5f}")
