import math
from collections import Counter

import numpy as np
import pytest

from robinlab.geometry import DomainSpec, geometric_measures, make_domain
from robinlab.mesh import check_mesh, load_mesh_dump, refine_near, triangulate


def _edge_counts(mesh):
    t = mesh.triangles
    e = np.sort(np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
    return Counter(map(tuple, e))


def _check_invariants(mesh):
    p = mesh.nodes[mesh.triangles]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    assert np.all(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] > 0)
    counts = _edge_counts(mesh)
    bset = {tuple(sorted(e)) for e in mesh.bedges.tolist()}
    assert all(c in (1, 2) for c in counts.values())
    assert {e for e, c in counts.items() if c == 1} == bset
    # boundary edges chain into one loop through every boundary node
    nxt = dict(mesh.bedges.tolist())
    start = mesh.bedges[0, 0]
    seen, cur = [start], nxt[start]
    while cur != start:
        seen.append(cur)
        cur = nxt[cur]
    assert sorted(seen) == list(range(mesh.n_boundary))
    assert mesh.min_angle() >= 15.0


def test_disk_coarse(disk):
    m = triangulate(disk, 0.2)
    assert 70 <= m.n_nodes <= 130
    _check_invariants(m)


def test_disk_area(disk_mesh):
    assert disk_mesh.areas().sum() == pytest.approx(math.pi, rel=5e-3)
    _check_invariants(disk_mesh)


def test_ellipse_euler(ellipse):
    m = triangulate(ellipse, 0.1)
    _check_invariants(m)
    V, E, F = m.n_nodes, len(_edge_counts(m)), len(m.triangles)
    assert V - E + F == 1


def test_corrugated_mesh(corrugated):
    m = triangulate(corrugated, 0.08)
    _check_invariants(m)
    area, _ = geometric_measures(corrugated)
    assert m.areas().sum() == pytest.approx(area, rel=5e-3)


def test_boundary_params_on_curve(ellipse):
    m = triangulate(ellipse, 0.1)
    pts = ellipse.points(m.node_params)
    assert np.allclose(pts, m.nodes[:m.n_boundary], atol=1e-12)
    # outward polygon normals agree with the curve normal at edge midpoints
    mid = 0.5 * (m.nodes[m.bedges[:, 0]] + m.nodes[m.bedges[:, 1]])
    assert np.all(np.einsum("ij,ij->i", m.bnormal, mid / [4.0, 1.0]) > 0)


@pytest.mark.parametrize("family", ["disk", "ellipse"])
def test_area_perimeter_orders(family):
    spec = DomainSpec.disk() if family == "disk" else DomainSpec.ellipse(2, 1)
    curve = make_domain(spec)
    area, perim = geometric_measures(curve)
    hs = [0.2, 0.1, 0.05]
    ea, ep = [], []
    for h in hs:
        m = triangulate(curve, h)
        ea.append(abs(m.areas().sum() - area))
        ep.append(abs(m.blength.sum() - perim))
    for e in (ea, ep):
        orders = np.log2(np.array(e[:-1]) / np.array(e[1:]))
        assert np.all(orders >= 1.8), orders


def test_deterministic(ellipse):
    a = triangulate(ellipse, 0.1)
    b = triangulate(ellipse, 0.1)
    assert np.array_equal(a.nodes, b.nodes) and np.array_equal(a.triangles, b.triangles)


def test_refine_near_density(disk):
    m = triangulate(disk, 0.1)
    r = refine_near(m, [(0.0, 0.0)], 0.4, disk)
    check_mesh(r)

    def density(mesh, rad):
        return np.count_nonzero(np.linalg.norm(mesh.nodes, axis=1) < rad) / (math.pi * rad * rad)

    ratio = density(r, 0.35) / density(m, 0.35)
    assert 3.0 <= ratio <= 5.0
    far = lambda mesh: np.count_nonzero(np.linalg.norm(mesh.nodes, axis=1) > 0.8)
    assert far(r) == pytest.approx(far(m), rel=0.15)


def test_refine_near_edge_cases(disk):
    m = triangulate(disk, 0.1)
    same = refine_near(m, [], 0.3, disk)
    assert np.array_equal(same.nodes, m.nodes)
    full = refine_near(m, [(0.0, 0.0)], 5.0, disk)
    half = triangulate(disk, 0.05)
    assert full.n_nodes == pytest.approx(half.n_nodes, rel=0.02)


def test_h_too_large(disk):
    with pytest.raises(ValueError):
        triangulate(disk, 1.0)
    with pytest.raises(ValueError):
        triangulate(disk, -0.1)


def test_locator(disk_mesh):
    loc = disk_mesh.locator()
    pts = np.array([[0.1, 0.2], [0.5, -0.3], [2.0, 0.0]])
    tri, bary = loc.locate(pts)
    assert tri[2] == -1 and np.all(tri[:2] >= 0)
    assert np.allclose(bary[:2].sum(axis=1), 1)
    # linear functions are interpolated exactly
    vals = 3 * disk_mesh.nodes[:, 0] - disk_mesh.nodes[:, 1] + 0.5
    assert np.allclose(loc.interpolate(vals, pts[:2]), 3 * pts[:2, 0] - pts[:2, 1] + 0.5)


def test_dump_roundtrip(tmp_path, ellipse):
    m = triangulate(ellipse, 0.15)
    m.dump(tmp_path / "m.txt")
    nodes, tris, bedges, bparams = load_mesh_dump(tmp_path / "m.txt")
    assert np.array_equal(nodes, m.nodes)
    assert np.array_equal(tris, m.triangles) and np.array_equal(bedges, m.bedges)
    assert np.array_equal(bparams, m.bparams)
