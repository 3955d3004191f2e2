"""Hyperparameter sweep over K1 and K2; writes CSV and SVG plots to ./sweep_out/."""

import os

from radarcctp import demo_scene_spec, generate_scene
from radarcctp.metrics import parse_grid, sweep_csv, sweep_report
from radarcctp.plots import sweep_svg

scene = generate_scene(demo_scene_spec())
configs = parse_grid("k1=2.5,5,10;k2=5;step1=ca,top")
rows = sweep_report(scene.tensor, scene.valid_mask, configs)

print(f"{'config':>16}  PRVM    RRIM")
for r in rows:
    o = r.report.overall
    print(f"{r.label:>16}  {o.prvm:.4f}  {o.rrim:.4f}")

os.makedirs("sweep_out", exist_ok=True)
with open("sweep_out/sweep.csv", "w") as fh:
    fh.write(sweep_csv(rows))
for metric in ("prvm", "rrim"):
    with open(f"sweep_out/{metric}.svg", "w") as fh:
        fh.write(sweep_svg(rows, metric))
print("wrote sweep_out/sweep.csv, prvm.svg, rrim.svg")
