"""
Disk across a flat interface
============================

Four runs: equal or weak blue/red tension, times equal or slow blue mobility.
Frames land in out/disk_slab_*; slow blue interfaces lag behind the fast ones
while the diffuse width stays the same everywhere.
"""

from dataclasses import replace

import numpy as np

from mobiflow.cli import read_preset, run_config
from mobiflow.config import parse_config
from mobiflow.scenarios import interface_width

K = 128
for name in ("disk_slab_s1_m1", "disk_slab_s1_m2", "disk_slab_s2_m1", "disk_slab_s2_m2"):
    cfg = replace(parse_config(read_preset(name)), sizes=(K, K), epsilon=1 / K, dt=1 / K**2)
    out = run_config(cfg, f"out/{name}")
    u0, u1 = out.frames[0][1], out.frames[-1][1]
    swept = [np.count_nonzero((u0[k] > 0.5) ^ (u1[k] > 0.5)) / u0[k].size for k in range(3)]
    w = interface_width(out.state, 1, (0.0, -0.1), (0.0, 0.1)) * K
    print(f"{name}: swept area " + " ".join(f"{s:.4f}" for s in swept) + f"   red/green width {w:.3f} eps")
