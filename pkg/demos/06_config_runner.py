"""Declarative experiments.

The same machinery is reachable from the command line:

    lab run disk_torsion.cfg
    lab sweep corrugated_k3.cfg --jobs 2
    lab mesh "corrugated_strip:k=3" --h 0.05 --dump-mesh mesh.txt
    lab compare out/disk_torsion/record.json <golden.json>

Here a config is written inline, run, and compared with itself.
"""
import tempfile
from pathlib import Path

from robinlab import lab

CONFIG = """
[domain]
family = ellipse
a = 2
b = 1

[problem]
kind = gelfand_exp
lambda = 0.1, 0.2

[grid]
beta = 1, 4
h = 0.08

[checks]
run = census, winding, stability, monotonicity, comparison, bmmp
n_max = 1

[output]
directory = {out}
contour = yes
"""

with tempfile.TemporaryDirectory() as tmp:
    cfg = lab.config_from_string(CONFIG.format(out=Path(tmp) / "run"))
    record = lab.run(cfg)
    for cell in record["cells"]:
        print(f"beta={cell['beta']:g} lambda={cell['lambda']:g}: sup {cell['sup_norm']:.5f}, "
              f"mu1 {cell['mu1']:.4f}, checks {cell['checks']}")
    print("global:", record["global_checks"], "status", record["status"])
    print("files:", sorted(p.name for p in (Path(tmp) / "run").iterdir()))
    again = lab.run(cfg, write=False)
    print("rerun identical:", lab.dumps_record(again) == lab.dumps_record(record))
