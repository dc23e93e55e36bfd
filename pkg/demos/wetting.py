"""
Droplet on a frozen solid
=========================

The solid has zero mobility, so only the liquid/vapour interface moves and
the droplet settles into a cap.  Frames go to out/wetting_*.
"""

import math
from dataclasses import replace

from mobiflow.cli import read_preset, run_config
from mobiflow.config import parse_config
from mobiflow.phases import young_angle
from mobiflow.scenarios import contact_angle

for name in ("wetting_flat_iso", "wetting_flat_ausi"):
    cfg = parse_config(read_preset(name))
    # quarter of the preset resolution keeps this under a minute
    cfg = replace(cfg, sizes=(128, 128), epsilon=1 / 128, dt=1 / 128**2, t_end=0.4,
                  frame_times=(0.0, 0.4))
    out = run_config(cfg, f"out/{name}")
    theta = contact_angle(out.state, cfg.index(cfg.liquid), cfg.index(cfg.solid))
    vl, vs, ls = cfg.tensions  # pairs (vapor, liquid), (vapor, solid), (liquid, solid)
    print(f"{name}: measured {math.degrees(theta):.2f} deg, Young {math.degrees(young_angle(vs, ls, vl)):.2f} deg")
