"""Domains and meshes.

Three domain families are available.  Disks and ellipses are exact
trigonometric curves; the corrugated stadium is a smoothed trigonometric
projection of a long rectangle whose top edge carries k bumps.  It is
star-shaped but its curvature changes sign.
"""
import math

from robinlab.geometry import (DomainSpec, convexity_report, geometric_measures, make_domain,
                               total_turning)
from robinlab.mesh import triangulate

for spec in (DomainSpec.disk(), DomainSpec.ellipse(2, 1), DomainSpec.corrugated_strip()):
    curve = make_domain(spec)
    area, perim = geometric_measures(curve)
    kmin, tmin, changes = convexity_report(curve)
    print(f"{spec.label():>40}: area {area:.6f}, perimeter {perim:.6f}, "
          f"min curvature {kmin:+.3f} ({changes} sign changes), "
          f"turning/2pi = {total_turning(curve) / (2 * math.pi):.12f}")

# Meshes come from a hexagonal lattice clipped to the curve, Delaunay
# triangulated and lightly smoothed.  The polygonal boundary loses O(h^2) area.
curve = make_domain(DomainSpec.ellipse(2, 1))
area, _ = geometric_measures(curve)
for h in (0.2, 0.1, 0.05):
    m = triangulate(curve, h)
    print(f"h={h:<5} nodes {m.n_nodes:5d}  min angle {m.min_angle():5.1f} deg  "
          f"area deficit {area - m.areas().sum():.2e}")
