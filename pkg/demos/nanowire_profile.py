"""
Nanowire profile
================

Quasi-static growth under a droplet: the droplet tilts by alpha, its radius
follows from volume conservation and the wire wall follows dh/dr = -tan(alpha).
"""

import math

from mobiflow.nanowire import WireParams, diameter_reduction, integrate_profile

cases = {
    "isotropic": WireParams(1.0, 1.0),
    "Au-Si": WireParams.from_tensions(0.85, 1.24, 0.62),
    "isotropic, geometric cap": WireParams(1.0, 1.0, 1.0, "geometric"),
    "mild angles": WireParams(1.5, 1.0),
}

for label, w in cases.items():
    tv, ts = w.angles
    p = integrate_profile(w, 400)
    red, reached = diameter_reduction(w)
    print(f"{label:26s} theta_V {math.degrees(tv):7.2f}  theta_S {math.degrees(ts):7.2f}  "
          f"r_end {p.r[-1]:.4f}  h_end {p.h[-1]:8.4f}  reduction {red:.4f}  stationary {reached}")

try:
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    for label, w in cases.items():
        p = integrate_profile(w, 400)
        plt.plot(p.r, p.h, label=label)
    plt.xlabel("r")
    plt.ylabel("h")
    plt.legend()
    plt.savefig("nanowire_profiles.png", dpi=120)
