import csv
import json
import math
import os
from pathlib import Path

import numpy as np
import pytest

from robinlab import cli, lab, solvers
from robinlab.mesh import triangulate

GOLDEN = Path(lab.__file__).parent / "configs" / "golden"

TORSION_CFG = """
[domain]
family = disk
[problem]
kind = torsion
[grid]
beta = {betas}
h = 0.1
[checks]
run = census, winding, stability, monotonicity, comparison, bmmp
n_max = {nmax}
[output]
directory = {out}
fields = yes
contour = yes
"""


def _cfg(tmp_path, betas="1, 4", nmax="1", name="run"):
    return lab.config_from_string(TORSION_CFG.format(betas=betas, nmax=nmax,
                                                     out=tmp_path / name))


def test_empty_grid_rejected(tmp_path, monkeypatch):
    called = []
    monkeypatch.setattr(lab, "make_domain", lambda *a: called.append(1))
    with pytest.raises(lab.ConfigError):
        _cfg(tmp_path, betas="")
    assert not called


@pytest.mark.parametrize("patch", [("h = 0.1", "h = -0.1"), ("kind = torsion", "kind = heat"),
                                   ("run = census", "run = census, magic"),
                                   ("family = disk", "family = disk\nR = -2"),
                                   ("beta = 1, 4", "beta = 1, -4")])
def test_config_validation(tmp_path, patch):
    text = TORSION_CFG.format(betas="1, 4", nmax="1", out=tmp_path).replace(*patch)
    with pytest.raises(lab.ConfigError):
        lab.config_from_string(text)


def test_nonlinear_needs_lambda_policy():
    text = "[domain]\nfamily = disk\n[problem]\nkind = gelfand_exp\n[grid]\nbeta = 1\nh = 0.1\n"
    with pytest.raises(lab.ConfigError):
        lab.config_from_string(text)


def test_bundled_configs_parse():
    for name in ("disk_torsion.cfg", "ellipse_eigen.cfg", "disk_gelfand.cfg", "corrugated_k3.cfg"):
        cfg = lab.load_config(name)
        assert cfg.betas and cfg.h > 0


def test_parse_domain_string():
    spec = lab.parse_domain_string("corrugated_strip:L=5,delta=0.05,k=2,N=64")
    assert (spec.L, spec.delta, spec.k, spec.N) == (5.0, 0.05, 2, 64)
    assert lab.parse_domain_string("ellipse:a=3,b=1").a == 3.0
    with pytest.raises(lab.ConfigError):
        lab.parse_domain_string("disk:radius=2")


def test_run_writes_outputs(tmp_path):
    cfg = _cfg(tmp_path)
    rec = lab.run(cfg)
    assert rec["status"] == 0 and rec["passed"]
    out = Path(cfg.output)
    for name in ("record.json", "timings.json", "summary.csv", "solution_b1.csv",
                 "contour_b4_nodes.csv", "contour_b4_triangles.csv"):
        assert (out / name).exists(), name
    with open(out / "solution_b1.csv", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["node", "x", "y", "u"] and len(rows) == rec["mesh_nodes"] + 1
    assert "seconds" not in (out / "record.json").read_text()
    c = rec["cells"][0]
    assert c["census"]["n_max"] == 1 and c["sup_norm"] == pytest.approx(0.75, rel=2e-2)


def test_failed_check_status(tmp_path):
    rec = lab.run(_cfg(tmp_path, nmax=">= 2"))
    assert rec["status"] == 1 and not rec["passed"]
    assert rec["cells"][0]["checks"]["census"] is False


def test_cell_errors_are_recorded(tmp_path, monkeypatch):
    real = solvers.solve_problem

    def flaky(mesh, beta, problem):
        if beta == 4.0:
            raise RuntimeError("boom")
        return real(mesh, beta, problem)

    monkeypatch.setattr(solvers, "solve_problem", flaky)
    rec = lab.run(_cfg(tmp_path, betas="1, 4, 16"), write=False)
    errs = [c["error"] for c in rec["cells"]]
    assert errs[0] is None and "boom" in errs[1] and errs[2] is None
    assert rec["status"] == 2


def test_rerun_byte_identical(tmp_path):
    a = lab.dumps_record(lab.run(_cfg(tmp_path, name="a")))
    b = lab.dumps_record(lab.run(_cfg(tmp_path, name="b")))
    assert a == b
    assert (tmp_path / "a" / "record.json").read_bytes() == (tmp_path / "b" / "record.json").read_bytes()


def test_pool_preserves_order(tmp_path):
    seq = lab.run(_cfg(tmp_path, betas="0.5, 2, 8", name="s"), write=False)
    par = lab.run(_cfg(tmp_path, betas="0.5, 2, 8", name="p"), jobs=3, write=False)
    assert lab.dumps_record(seq) == lab.dumps_record(par)
    assert [c["beta"] for c in par["cells"]] == [0.5, 2.0, 8.0]


def test_contour_roundtrip(tmp_path, disk):
    m = triangulate(disk, 0.1)
    u = solvers.solve_torsion(m, 1.0) + 1e-17 * np.arange(m.n_nodes)
    nodes_path, tris_path = lab.emit_contour_data(m, u, tmp_path / "c")
    xyu, tris = lab.read_contour_data(tmp_path / "c")
    assert len(xyu) == m.n_nodes and len(tris) == len(m.triangles)
    assert np.array_equal(xyu[:, 2], u) and np.array_equal(xyu[:, :2], m.nodes)
    assert np.array_equal(tris, m.triangles)


def test_contour_unwritable(tmp_path, disk):
    m = triangulate(disk, 0.2)
    with pytest.raises(OSError):
        lab.emit_contour_data(m, np.zeros(m.n_nodes), tmp_path / "missing" / "dir" / "c")


def test_compare_fields(disk_mesh_fine):
    m = disk_mesh_fine
    u10 = solvers.solve_torsion(m, 10.0)
    assert lab.compare_fields(m, u10, u10) == (0.0, 0.0, 0.0)
    uD = solvers.solve_dirichlet(m, "torsion")
    linf, l2, dist = lab.compare_fields(m, u10, uD)
    assert linf == pytest.approx(1 / 20, rel=0.1)
    assert l2 == pytest.approx(math.sqrt(math.pi) / 20, rel=0.1)
    assert dist < 2 * m.h
    u20, u40 = solvers.solve_torsion(m, 20.0), solvers.solve_torsion(m, 40.0)
    assert np.all(u40 <= u20 + 1e-8)
    with pytest.raises(ValueError):
        lab.compare_fields(m, u10, u10[:-1])


def test_golden_compare(tmp_path):
    rec = lab.run(lab.load_config("disk_torsion.cfg"), write=False)
    gold = json.loads((GOLDEN / "disk_torsion.json").read_text())
    assert lab.compare_records(rec, gold) == []
    gold["cells"][0]["sup_norm"] *= 1.01
    assert any("sup_norm" in d for d in lab.compare_records(rec, gold))


def test_cli_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "t.cfg"
    cfg.write_text(TORSION_CFG.format(betas="1", nmax="1", out=tmp_path / "o"))
    assert cli.main(["run", str(cfg)]) == 0
    bad = tmp_path / "bad.cfg"
    bad.write_text(TORSION_CFG.format(betas="1", nmax=">= 3", out=tmp_path / "o2"))
    assert cli.main(["run", str(bad)]) == 1
    empty = tmp_path / "empty.cfg"
    empty.write_text(TORSION_CFG.format(betas="", nmax="1", out=tmp_path / "o3"))
    assert cli.main(["run", str(empty)]) == 2
    assert cli.main(["run", str(tmp_path / "nope.cfg")]) == 2
    assert cli.main(["sweep", str(cfg), "--jobs", "2", "--output", str(tmp_path / "o4")]) == 0
    rec1, rec2 = tmp_path / "o" / "record.json", tmp_path / "o4" / "record.json"
    assert rec1.read_bytes() == rec2.read_bytes()
    assert cli.main(["compare", str(rec1), str(rec2)]) == 0
    other = tmp_path / "o2" / "record.json"
    assert cli.main(["compare", str(rec1), str(other)]) == 1
    assert cli.main(["compare", str(rec1), str(tmp_path / "missing.json")]) == 2


def test_cli_mesh(tmp_path, capsys):
    dump = tmp_path / "mesh.txt"
    curve = tmp_path / "curve.txt"
    assert cli.main(["mesh", "ellipse:a=2,b=1", "--h", "0.2", "--dump-mesh", str(dump),
                     "--dump-curve", str(curve)]) == 0
    out = capsys.readouterr().out
    assert "nodes=" in out and dump.exists() and curve.exists()
    assert cli.main(["mesh", "disk", "--h", "5"]) == 2


def test_cli_golden(tmp_path):
    cfg = tmp_path / "t.cfg"
    cfg.write_text(TORSION_CFG.format(betas="2", nmax="1", out=tmp_path / "o"))
    assert cli.main(["run", str(cfg)]) == 0
    gold = tmp_path / "g.json"
    assert cli.main(["golden", str(tmp_path / "o" / "record.json"), str(gold)]) == 0
    assert "mesh_nodes" not in gold.read_text()  # metrics only
    assert cli.main(["run", str(cfg), "--golden", str(gold)]) == 0
