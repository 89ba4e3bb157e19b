"""Config-driven experiment runner.

Config files are INI-style (``configparser``)::

    [domain]
    family = disk
    R = 1

    [problem]
    kind = torsion            ; torsion | eigen | gelfand_exp | power_p
    lambda = 0.2, 0.4         ; explicit lambda values (nonlinear kinds)
    lambda_fraction = 0.5     ; or a fraction of the bracketed lambda*

    [grid]
    beta = 1, 4, 16
    h = 0.05

    [checks]
    run = census, winding, stability, monotonicity, comparison, bmmp
    n_max = 1                 ; exact count, or ">= 3"

    [output]
    directory = out/disk_torsion

Outputs: ``record.json`` (the RunRecord, deterministic), ``timings.json``,
``summary.csv`` and, when enabled, per-cell solution and contour CSVs.
"""
from __future__ import annotations

import configparser
import csv
import hashlib
import json
import math
import os
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import critpoints, solvers
from .assembly import Nonlinearity
from .geometry import DomainSpec, make_domain
from .mesh import Mesh, triangulate
from .stability import stability_report

CHECKS = ("census", "winding", "stability", "monotonicity", "comparison", "bmmp",
          "census_refinement")
BUNDLED = Path(__file__).parent / "configs"


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    domain: DomainSpec
    problem: str
    betas: list
    h: float
    lambdas: list = field(default_factory=list)
    lambda_fraction: float | None = None
    p: float = 2.0
    checks: list = field(default_factory=list)
    expect: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    output: str | None = None
    fields: bool = False
    contour: bool = False
    adaptive: bool = False
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.betas:
            raise ConfigError("beta grid is empty")
        if any(not (b > 0) for b in self.betas):
            raise ConfigError("beta values must be positive")
        if not self.h > 0:
            raise ConfigError("h must be positive")
        if self.problem not in ("torsion", "eigen", "gelfand_exp", "power_p"):
            raise ConfigError(f"unknown problem kind {self.problem!r}")
        if self.problem in ("gelfand_exp", "power_p"):
            if not self.lambdas and self.lambda_fraction is None:
                raise ConfigError("nonlinear problems need lambda or lambda_fraction")
            if any(not (lam > 0) for lam in self.lambdas):
                raise ConfigError("lambda values must be positive")
        bad = [c for c in self.checks if c not in CHECKS]
        if bad:
            raise ConfigError(f"unknown checks: {', '.join(bad)}")

    def nonlinearity(self) -> Nonlinearity | str:
        if self.problem == "eigen":
            return "eigen"
        return Nonlinearity(self.problem, 1.0, self.p)

    def hash(self) -> str:
        blob = json.dumps(self.source, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _floats(text):
    return [float(v) for v in re.split(r"[,\s]+", text.strip()) if v]


def _bool(text):
    return text.strip().lower() in ("1", "yes", "true", "on")


def parse_domain(section) -> DomainSpec:
    section = dict(section)
    family = section.pop("family", None)
    if family is None:
        raise ConfigError("domain.family is required")
    kwargs = {}
    for key, val in section.items():
        if key == "center":
            kwargs["center"] = tuple(_floats(val))
        elif key in ("k", "n"):
            kwargs[key.upper() if key == "n" else key] = int(val)
        elif key in ("r", "a", "b", "l", "delta"):
            name = {"r": "R", "l": "L"}.get(key, key)
            kwargs[name] = float(val)
        else:
            raise ConfigError(f"unknown domain key {key!r}")
    try:
        return DomainSpec(family, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_domain_string(text: str) -> DomainSpec:
    """``"disk"``, ``"disk:R=2"``, ``"ellipse:a=2,b=1"``, ``"corrugated_strip:k=3"``."""
    family, _, rest = text.partition(":")
    section = {"family": family}
    for item in filter(None, rest.split(",")):
        key, _, val = item.partition("=")
        section[key.strip().lower()] = val.strip()
    return parse_domain(section)


def load_config(path) -> ExperimentConfig:
    path = resolve_config_path(path)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    with open(path, encoding="utf-8") as fh:
        cp.read_file(fh)
    return config_from_parser(cp, base=Path(path).parent)


def config_from_string(text: str, base=".") -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.read_string(text)
    return config_from_parser(cp, base=Path(base))


def config_from_parser(cp, base=Path(".")) -> ExperimentConfig:
    for sec in ("domain", "problem", "grid"):
        if not cp.has_section(sec):
            raise ConfigError(f"missing [{sec}] section")
    source = {s: dict(cp[s]) for s in cp.sections()}
    source.pop("output", None)
    prob = cp["problem"]
    grid = cp["grid"]
    checks_sec = cp["checks"] if cp.has_section("checks") else {}
    checks = [c.strip() for c in checks_sec.get("run", "").split(",") if c.strip()]
    expect = {k: v for k, v in checks_sec.items() if k != "run"}
    out = cp["output"] if cp.has_section("output") else {}
    outdir = out.get("directory")
    tol = dict(cp["tolerances"]) if cp.has_section("tolerances") else {}
    if "h" not in grid or "beta" not in grid:
        raise ConfigError("[grid] needs h and beta")
    return ExperimentConfig(
        domain=parse_domain(cp["domain"]),
        problem=prob.get("kind", "torsion").strip(),
        betas=_floats(grid["beta"]),
        h=float(grid["h"]),
        lambdas=_floats(prob.get("lambda", "")),
        lambda_fraction=float(prob["lambda_fraction"]) if "lambda_fraction" in prob else None,
        p=float(prob.get("p", 2.0)),
        checks=checks,
        expect=expect,
        tolerances={k: float(v) for k, v in tol.items()},
        output=outdir,
        fields=_bool(out.get("fields", "no")),
        contour=_bool(out.get("contour", "no")),
        adaptive=_bool(checks_sec.get("adaptive", "no")) if checks_sec else False,
        source=source,
    )


def resolve_config_path(path) -> Path:
    p = Path(path)
    if p.exists():
        return p
    if (BUNDLED / p.name).exists():
        return BUNDLED / p.name
    raise ConfigError(f"config file not found: {path}")


# ------------------------------------------------------------------ outputs

def write_solution_csv(mesh: Mesh, u, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "x", "y", "u"])
        for i, ((x, y), val) in enumerate(zip(mesh.nodes, u)):
            w.writerow([i, repr(float(x)), repr(float(y)), repr(float(val))])


def emit_contour_data(mesh: Mesh, u, path):
    """Write ``<path>_nodes.csv`` (x, y, u) and ``<path>_triangles.csv`` (i, j, k)."""
    path = str(path)
    nodes_path = path + "_nodes.csv"
    tris_path = path + "_triangles.csv"
    with open(nodes_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "u"])
        for (x, y), val in zip(mesh.nodes, u):
            w.writerow([repr(float(x)), repr(float(y)), repr(float(val))])
    with open(tris_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "k"])
        w.writerows(mesh.triangles.tolist())
    return nodes_path, tris_path


def read_contour_data(path):
    path = str(path)
    with open(path + "_nodes.csv", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))[1:]
    xyu = np.array([[float(v) for v in r] for r in rows])
    with open(path + "_triangles.csv", encoding="utf-8") as fh:
        tris = np.array([[int(v) for v in r] for r in list(csv.reader(fh))[1:]], dtype=int)
    return xyu, tris


def compare_fields(mesh: Mesh, u1, u2):
    """``(max-norm diff, L2 diff, distance between the argmax nodes)``."""
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    if u1.shape != (mesh.n_nodes,) or u2.shape != (mesh.n_nodes,):
        raise ValueError("fields do not live on the given mesh")
    d = u1 - u2
    l2 = math.sqrt(max(float(d @ (solvers.operators(mesh).M @ d)), 0.0))
    dist = float(np.linalg.norm(mesh.nodes[np.argmax(u1)] - mesh.nodes[np.argmax(u2)]))
    return float(np.max(np.abs(d))), l2, dist


# ------------------------------------------------------------------ running

def _expect_ok(spec: str, value: int) -> bool:
    m = re.fullmatch(r"\s*(>=|<=|==|>|<)?\s*(-?\d+)\s*", spec)
    if not m:
        raise ConfigError(f"bad expectation {spec!r}")
    op, n = m.group(1) or "==", int(m.group(2))
    return {"==": value == n, ">=": value >= n, "<=": value <= n,
            ">": value > n, "<": value < n}[op]


def _round(x, digits=12):
    """Round for stable JSON output across platforms."""
    if x is None:
        return None
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return float(f"{float(x):.{digits}g}")


class _Context:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.curve = make_domain(cfg.domain)
        self.mesh = triangulate(self.curve, cfg.h)
        self._fine = None

    @property
    def fine_mesh(self):
        if self._fine is None:
            self._fine = triangulate(self.curve, self.cfg.h / 2)
        return self._fine


def _cells(cfg: ExperimentConfig):
    if cfg.problem in ("torsion", "eigen") or not cfg.lambdas:
        return [(b, None) for b in cfg.betas]
    return [(b, lam) for b in cfg.betas for lam in cfg.lambdas]


def run_cell(cfg: ExperimentConfig, beta: float, lam, ctx: _Context | None = None) -> dict:
    """Solve one ``(beta, lambda)`` cell and evaluate the per-cell checks."""
    ctx = ctx or _Context(cfg)
    mesh, curve = ctx.mesh, ctx.curve
    cell = {"beta": _round(beta), "lambda": _round(lam), "checks": {}, "error": None}
    t0 = time.perf_counter()
    try:
        problem = cfg.nonlinearity()
        lam_beta = solvers.robin_eigenpair(mesh, beta).lambda_beta
        cell["lambda_beta"] = _round(lam_beta)
        if isinstance(problem, Nonlinearity) and problem.kind != "torsion":
            if lam is None:
                branch = solvers.continue_branch(mesh, beta, problem,
                                                 solvers.StepPolicy(stability=False))
                lo, hi = branch.lambda_star
                cell["lambda_star"] = [_round(lo), _round(hi)]
                lam = cfg.lambda_fraction * lo
                cell["lambda"] = _round(lam)
            problem = problem.with_lam(lam)

        def solve_on(m):
            out = solvers.solve_problem(m, beta, problem)
            if isinstance(out, solvers.Diverged):
                raise RuntimeError(f"Picard iteration diverged ({out.reason})")
            return out

        u = solve_on(mesh)
        cell["sup_norm"] = _round(float(np.max(u)))
        imax = int(np.argmax(u))
        cell["max_location"] = [_round(v) for v in mesh.nodes[imax]]
        f_eff = solvers.effective_nonlinearity(mesh, beta, problem)
        checks = cell["checks"]

        if {"census", "winding", "census_refinement"} & set(cfg.checks):
            cs = critpoints.census(mesh, u, curve, beta,
                                   resolve=solve_on if cfg.adaptive else None)
            cj = cs.to_json()
            cj["points"] = [{k: (_round(v) if isinstance(v, float) else v)
                             for k, v in p.items() if k != "hessian"} for p in cj["points"]]
            cj["winding_residue"] = _round(cj["winding_residue"], 6)
            cell["census"] = cj
            if "census" in cfg.checks:
                ok = cs.hopf_ok and not cs.degenerate
                for kind in ("max", "saddle", "min"):
                    spec = cfg.expect.get(f"n_{kind}")
                    if spec is not None:
                        ok = ok and _expect_ok(spec, cs.counts().get(kind, 0))
                checks["census"] = bool(ok)
            if "winding" in cfg.checks:
                checks["winding"] = bool(cs.index_sum == 1 and cs.boundary_winding == 1)
            if "census_refinement" in cfg.checks:
                fine = ctx.fine_mesh
                cf = critpoints.census(fine, solve_on(fine), curve, beta)
                cell["census_fine"] = {"n_max": cf.n_max, "n_saddle": cf.n_saddle,
                                       "index_sum": cf.index_sum}
                checks["census_refinement"] = bool(cf.signature() == cs.signature())

        if "stability" in cfg.checks or "bmmp" in cfg.checks:
            rep = stability_report(mesh, curve, beta, u, f_eff, scale=lam_beta)
            cell["mu1"] = _round(rep.mu1, 8)
            cell["bmmp_integral"] = _round(rep.bmmp_integral, 10)
            cell["bmmp_condition2"] = rep.bmmp_condition2
            cell["unstable_flag"] = rep.unstable_flag
            if "stability" in cfg.checks:
                checks["stability"] = bool(rep.stable)
            if "bmmp" in cfg.checks:
                # the flag forces instability; a stable solution must not carry it
                checks["bmmp"] = bool(not rep.unstable_flag or rep.mu1 < 0)

        if "comparison" in cfg.checks and isinstance(problem, Nonlinearity):
            ok, _, _ = solvers.comparison_bound(mesh, beta, problem, problem.lam, u=u)
            checks["comparison"] = bool(ok)

        if cfg.output and (cfg.fields or cfg.contour):
            tag = f"b{beta:g}" + ("" if lam is None else f"_l{lam:.6g}")
            os.makedirs(cfg.output, exist_ok=True)
            if cfg.fields:
                write_solution_csv(mesh, u, Path(cfg.output) / f"solution_{tag}.csv")
            if cfg.contour:
                emit_contour_data(mesh, u, Path(cfg.output) / f"contour_{tag}")
        cell["_field"] = u
    except Exception as exc:  # recorded per cell; the run continues
        cell["error"] = f"{type(exc).__name__}: {exc}"
    cell["_seconds"] = time.perf_counter() - t0
    return cell


def _run_cell_job(args):
    cfg, beta, lam = args
    cell = run_cell(cfg, beta, lam)
    return cell


def _monotonicity(cfg, ctx, cells) -> dict:
    """Ordering checks across the beta grid (fixed lambda only)."""
    out = {}
    problem = cfg.nonlinearity()
    mesh = ctx.mesh
    groups = {}
    for c in cells:
        if c["error"] is None and "_field" in c:
            groups.setdefault(c["lambda"], []).append(c)
    ok = True
    detail = []
    for lam, group in groups.items():
        group.sort(key=lambda c: c["beta"])
        if problem == "eigen":
            lams = [c["lambda_beta"] for c in group]
            lamD = solvers.dirichlet_eigenpair(mesh).lambda_beta
            good = all(a < b for a, b in zip(lams, lams[1:])) and lams[-1] <= lamD
            detail.append({"lambda_D": _round(lamD), "ok": good})
            ok = ok and good
            continue
        if problem.kind != "torsion" and cfg.lambda_fraction is not None and not cfg.lambdas:
            continue  # lambda differs per beta; no ordering is claimed
        p = problem if lam is None else problem.with_lam(lam)
        uD = solvers.solve_dirichlet(mesh, p)
        good = not isinstance(uD, solvers.Diverged)
        fields = [c["_field"] for c in group]
        if good:
            good = all(np.all(b <= a + 1e-8) for a, b in zip(fields, fields[1:]))
            good = good and bool(np.all(uD <= fields[-1] + 1e-8))
            errs = [float(np.max(np.abs(f - uD))) for f in fields]
            for c, e in zip(group, errs):
                c["dirichlet_distance"] = _round(e)
            good = good and all(b < a for a, b in zip(errs, errs[1:]))
        detail.append({"lambda": lam, "ok": bool(good)})
        ok = ok and good
    out["monotonicity"] = bool(ok)
    return out, detail


def run(cfg: ExperimentConfig, jobs: int = 1, write: bool = True) -> dict:
    """Execute every cell and the cross-cell checks; return the RunRecord."""
    t0 = time.perf_counter()
    ctx = _Context(cfg)
    todo = _cells(cfg)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cells = list(pool.map(_run_cell_job, [(cfg, b, lam) for b, lam in todo]))
    else:
        cells = [run_cell(cfg, b, lam, ctx) for b, lam in todo]

    global_checks = {}
    mono_detail = None
    if "monotonicity" in cfg.checks:
        try:
            res, mono_detail = _monotonicity(cfg, ctx, cells)
            global_checks.update(res)
        except Exception as exc:
            global_checks["monotonicity"] = False
            mono_detail = [{"error": f"{type(exc).__name__}: {exc}"}]

    timings = {"total_seconds": time.perf_counter() - t0,
               "cells": [{"beta": c["beta"], "lambda": c["lambda"],
                          "seconds": c.pop("_seconds")} for c in cells]}
    for c in cells:
        c.pop("_field", None)
    errors = [c["error"] for c in cells if c["error"]]
    all_checks = [v for c in cells for v in c["checks"].values()] + list(global_checks.values())
    record = {
        "config_hash": cfg.hash(),
        "domain": cfg.domain.label(),
        "problem": cfg.problem,
        "h": cfg.h,
        "mesh_nodes": ctx.mesh.n_nodes,
        "cells": cells,
        "global_checks": global_checks,
        "monotonicity_detail": mono_detail,
        "passed": bool(all(all_checks)) and not errors,
        "status": 2 if errors else (0 if all(all_checks) else 1),
    }
    if write and cfg.output:
        os.makedirs(cfg.output, exist_ok=True)
        with open(Path(cfg.output) / "record.json", "w", encoding="utf-8") as fh:
            fh.write(dumps_record(record))
        with open(Path(cfg.output) / "timings.json", "w", encoding="utf-8") as fh:
            json.dump(timings, fh, indent=1)
        write_summary_csv(record, Path(cfg.output) / "summary.csv")
    return record


def dumps_record(record: dict) -> str:
    return json.dumps(record, indent=1, sort_keys=True) + "\n"


def write_summary_csv(record, path) -> None:
    cols = ["beta", "lambda", "lambda_beta", "sup_norm", "mu1", "n_max", "n_saddle",
            "index_sum", "boundary_winding", "passed", "error"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for c in record["cells"]:
            cs = c.get("census", {})
            w.writerow([c["beta"], c["lambda"], c.get("lambda_beta"), c.get("sup_norm"),
                        c.get("mu1"), cs.get("n_max"), cs.get("n_saddle"), cs.get("index_sum"),
                        cs.get("boundary_winding"), all(c["checks"].values()), c["error"] or ""])


# ------------------------------------------------------------------ regression

DEFAULT_BANDS = {"rtol": 1e-6, "atol": 1e-6}
_METRICS = ("lambda_beta", "sup_norm", "mu1", "bmmp_integral", "lambda")


def golden_from_record(record: dict, rtol=1e-6, atol=1e-6) -> dict:
    """Metrics-only view of a RunRecord with tolerance bands."""
    cells = []
    for c in record["cells"]:
        entry = {k: c.get(k) for k in ("beta",) + _METRICS if c.get(k) is not None}
        cs = c.get("census")
        if cs:
            entry.update(n_max=cs["n_max"], n_saddle=cs["n_saddle"],
                         index_sum=cs["index_sum"], boundary_winding=cs["boundary_winding"])
        entry["checks"] = c["checks"]
        cells.append(entry)
    return {"config_hash": record["config_hash"], "tolerances": {"rtol": rtol, "atol": atol},
            "cells": cells, "passed": record["passed"]}


def compare_records(rec: dict, golden: dict) -> list:
    """Differences between a record and a golden (or another) record.

    Float metrics compare within the golden's ``rtol``/``atol`` bands; counts
    and check outcomes must match exactly.  Returns a list of messages.
    """
    bands = golden.get("tolerances", DEFAULT_BANDS)
    a = golden_from_record(rec) if "domain" in rec else rec
    b = golden_from_record(golden) if "domain" in golden else golden
    diffs = []
    if len(a["cells"]) != len(b["cells"]):
        return [f"cell count {len(a['cells'])} != {len(b['cells'])}"]
    for i, (ca, cb) in enumerate(zip(a["cells"], b["cells"])):
        for key in sorted(set(ca) | set(cb)):
            va, vb = ca.get(key), cb.get(key)
            if isinstance(va, float) or isinstance(vb, float):
                if va is None or vb is None or not math.isclose(
                        va, vb, rel_tol=bands["rtol"], abs_tol=bands["atol"]):
                    diffs.append(f"cell {i} {key}: {va} vs {vb}")
            elif va != vb:
                diffs.append(f"cell {i} {key}: {va} vs {vb}")
    return diffs
