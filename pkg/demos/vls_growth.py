"""
Vapour-liquid-solid growth
==========================

Stage A lets the droplet wet the substrate with every volume held fixed.
Stage B slows the solid down and feeds it from the vapour through the
liquid/solid contact, while the liquid volume stays put.
"""

from dataclasses import replace

from mobiflow.cli import read_preset, run_config
from mobiflow.config import parse_config

cfg = parse_config(read_preset("vls_isotropic"))
cfg = replace(cfg, sizes=(128, 128), epsilon=1 / 128, dt=1 / 128**2)
out = run_config(cfg, "out/vls_demo")

cols = out.diagnostics.columns
rows = out.diagnostics.as_array()
liq, sol = 2 + cfg.index("liquid"), 2 + cfg.index("solid")
for r in rows[:: max(1, len(rows) // 12)]:
    print(f"t={r[0]:.3f}  {cols[liq]}={r[liq]:.6f}  {cols[sol]}={r[sol]:.6f}")
