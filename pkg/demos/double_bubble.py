"""
Double bubble
=============

Two half disks inside a third phase.  With equal tensions the triple
junctions open to 120 degrees within a short time; unequal tensions move
them away from the symmetric angles.
"""

import numpy as np

from mobiflow import herring_angles
from mobiflow.cli import oracle_junction

for tensions in [(1, 1, 1), (0.8, 1, 1)]:
    print("tensions", tensions, "sharp-interface angles",
          np.degrees(herring_angles(*tensions)).round(2))
    for k, a in enumerate(oracle_junction(128, t_end=0.01, tensions=tensions)):
        print(f"  junction {k}: " + "  ".join(f"{x:7.2f}" for x in a))
