"""Command line entry point: ``lab run|sweep|mesh|compare``."""
from __future__ import annotations

import argparse
import json
import sys

from . import lab
from .geometry import convexity_report, geometric_measures, make_domain
from .mesh import MeshingError, triangulate

EXIT_OK, EXIT_CHECK, EXIT_INFRA = 0, 1, 2


def _print_summary(record):
    for c in record["cells"]:
        head = f"beta={c['beta']:g}" + ("" if c["lambda"] is None else f" lambda={c['lambda']:.6g}")
        if c["error"]:
            print(f"{head}: ERROR {c['error']}")
            continue
        checks = " ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in c["checks"].items())
        cs = c.get("census")
        extra = f" max={cs['n_max']} saddle={cs['n_saddle']} index={cs['index_sum']}" if cs else ""
        print(f"{head}: sup={c['sup_norm']:.6g}{extra} {checks}".rstrip())
    for k, v in record["global_checks"].items():
        print(f"{k}: {'ok' if v else 'FAIL'}")
    print("PASS" if record["status"] == 0 else ("FAIL" if record["status"] == 1 else "ERROR"))


def _cmd_run(args, jobs=1):
    try:
        cfg = lab.load_config(args.config)
        if args.output:
            cfg.output = args.output
    except (lab.ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_INFRA
    try:
        record = lab.run(cfg, jobs=jobs)
    except (ValueError, MeshingError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFRA
    _print_summary(record)
    if args.golden:
        with open(args.golden, encoding="utf-8") as fh:
            diffs = lab.compare_records(record, json.load(fh))
        for d in diffs:
            print(f"golden mismatch: {d}")
        if diffs and record["status"] == 0:
            return EXIT_CHECK
    return record["status"]


def _cmd_mesh(args):
    try:
        spec = lab.parse_domain_string(args.domain)
        curve = make_domain(spec)
        mesh = triangulate(curve, args.h)
    except (ValueError, MeshingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFRA
    area, perim = geometric_measures(curve)
    kmin, _, changes = convexity_report(curve)
    print(f"domain {spec.label()}: area={area:.10g} perimeter={perim:.10g} "
          f"min_kappa={kmin:.6g} kappa_sign_changes={changes}")
    print(f"mesh h={args.h:g}: nodes={mesh.n_nodes} triangles={len(mesh.triangles)} "
          f"boundary={mesh.n_boundary} min_angle={mesh.min_angle():.2f}")
    if args.dump_mesh:
        mesh.dump(args.dump_mesh)
    if args.dump_curve:
        curve.dump(args.dump_curve)
    return EXIT_OK


def _cmd_compare(args):
    try:
        with open(args.rec1, encoding="utf-8") as fh:
            a = json.load(fh)
        with open(args.rec2, encoding="utf-8") as fh:
            b = json.load(fh)
        if args.rtol is not None or args.atol is not None:
            b = lab.golden_from_record(b) if "domain" in b else dict(b)
            bands = dict(b.get("tolerances", lab.DEFAULT_BANDS))
            if args.rtol is not None:
                bands["rtol"] = args.rtol
            if args.atol is not None:
                bands["atol"] = args.atol
            b["tolerances"] = bands
        diffs = lab.compare_records(a, b)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFRA
    for d in diffs:
        print(d)
    print("records agree" if not diffs else f"{len(diffs)} difference(s)")
    return EXIT_OK if not diffs else EXIT_CHECK


def _cmd_golden(args):
    with open(args.record, encoding="utf-8") as fh:
        rec = json.load(fh)
    gold = lab.golden_from_record(rec, rtol=args.rtol, atol=args.atol)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(gold, indent=1, sort_keys=True) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lab", description="Robin-problem experiment runner")
    sub = p.add_subparsers(dest="cmd", required=True)

    r = sub.add_parser("run", help="run a config sequentially")
    r.add_argument("config")
    r.add_argument("--output", help="override the output directory")
    r.add_argument("--golden", help="golden record to regress against")

    s = sub.add_parser("sweep", help="run a config with a worker pool")
    s.add_argument("config")
    s.add_argument("--jobs", type=int, default=2)
    s.add_argument("--output")
    s.add_argument("--golden")

    m = sub.add_parser("mesh", help="build and report a mesh")
    m.add_argument("domain", help='e.g. "disk", "ellipse:a=2,b=1", "corrugated_strip:k=3"')
    m.add_argument("--h", type=float, required=True)
    m.add_argument("--dump-mesh")
    m.add_argument("--dump-curve")

    c = sub.add_parser("compare", help="compare two records within tolerance bands")
    c.add_argument("rec1")
    c.add_argument("rec2", help="record or golden file (its bands apply)")
    c.add_argument("--rtol", type=float)
    c.add_argument("--atol", type=float)

    g = sub.add_parser("golden", help="extract a metrics-only golden record")
    g.add_argument("record")
    g.add_argument("out")
    g.add_argument("--rtol", type=float, default=1e-6)
    g.add_argument("--atol", type=float, default=1e-6)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.cmd == "run":
        return _cmd_run(args)
    if args.cmd == "sweep":
        if args.jobs < 1:
            print("--jobs must be >= 1", file=sys.stderr)
            return EXIT_INFRA
        return _cmd_run(args, jobs=args.jobs)
    if args.cmd == "mesh":
        return _cmd_mesh(args)
    if args.cmd == "compare":
        return _cmd_compare(args)
    return _cmd_golden(args)


if __name__ == "__main__":
    sys.exit(main())
