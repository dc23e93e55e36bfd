"""
Shrinking circle
================

A disk of phase 1 in phase 2 shrinks by mean curvature: R^2 = R0^2 - 2 m sigma t.
The stabilised step slows the interface when dt is comparable to eps^2, so the
fitted slope is shown for a few time steps next to the finite-step estimate.
"""

from mobiflow.cli import oracle_circle

K = 128
alpha = 2.5

for m in (1.0, 0.5):
    for f in (1.0, 0.25, 1 / 16):
        _, _, slope = oracle_circle(K, mobility=m, dt_factor=f)
        estimate = -2 * m / (1 + (alpha + 0.2) * m * f)
        print(f"m={m:<4g} dt={f:<7g}eps^2  slope {slope:8.4f}   estimate {estimate:8.4f}   sharp law {-2 * m:g}")
