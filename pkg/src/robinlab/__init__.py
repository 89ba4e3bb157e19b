"""P1 finite elements for Robin boundary value problems on planar domains.

Modules: ``geometry`` (boundary curves), ``mesh`` (triangulation),
``linalg`` (CG and inverse iteration), ``assembly`` (K, M, B),
``solvers`` (torsion, eigen, minimal branch), ``stability``,
``critpoints`` (census and index sums) and ``lab`` (config runner).
"""
from .geometry import BoundaryCurve, DomainSpec, GeometryError, make_domain, sample
from .mesh import Mesh, MeshingError, triangulate
from .assembly import Nonlinearity
from .solvers import (beta_sweep, continue_branch, picard_minimal, robin_eigenpair,
                      solve_dirichlet, solve_problem, solve_torsion)
from .stability import stability_report
from .critpoints import census

__version__ = "0.1.0"
