"""
Equal-area analysis of a current-limited converter
==================================================

A grid-forming converter feeds an infinite bus through its transformer and a
line. A bolted fault at the infinite bus drops the delivered power to zero,
and the converter's angle runs away until the fault is cleared. How far it
may run depends on the post-fault power-angle curve, and that curve depends
on the current limiter.
"""

import math

import numpy as np

from gfmstab import eac

# operating point from the power delivered at the grid-side bus
params = eac.SmibParams.from_setpoint(v_e=1.0, x_e=0.1, x_c=0.15, p_g0=0.7, q_g0=0.049)
print(f"v_f0 = {params.v_f0:.4f} pu, delta_0 = {math.degrees(params.delta_0):.2f} deg")

###############################################################################
# Power-angle curves
# ------------------
# Without a limiter the curve is a sinusoid. The saturation clamp bends it
# down once the link current would exceed i_max. The hybrid limiter switches
# in a virtual impedance at the current threshold, which lowers the curve in
# one step.

cases = eac.standard_cases()
grid = np.radians([0, 30, 60, 90, 120, 150, 180])
print("\ndelta(deg) " + " ".join(f"{c.label:>13}" for c in cases))
for d in grid:
    row = " ".join(f"{eac.pdelta(c, params, d):13.3f}" for c in cases)
    print(f"{math.degrees(d):10.0f} {row}")

###############################################################################
# Critical clearing angles
# ------------------------
# The clearing angle balances the accelerating area against the decelerating
# area up to the post-fault unstable equilibrium.

print()
for r in eac.table(params, cases):
    print(f"{r.case.label:<13} clear by {math.degrees(r.delta_cl_crit):7.2f} deg, "
          f"swing limit {math.degrees(r.delta_mte_crit):7.2f} deg, p_max {r.p_g_max:.3f} pu")

###############################################################################
# A constant voltage boost of 0.1 pu raises every curve, so the boosted cases
# tolerate a later clearing. Under the clamp, though, the gain is small: the
# delivered power can never exceed v_e * i_max however high the converter
# voltage goes.

print(f"\nupper bound under the clamp: {params.v_e * 1.25:.3f} pu")
