"""Exact stable inversion and what goes wrong without it.

A desired output can be reproduced by a bounded input only if it lies in
the image of the plant and vanishes at every RHP zero. This script builds
the exact right inverse of the 2x2 benchmark plant, classifies two desired
outputs, and simulates both with the lossless exponential integrator.
"""

import numpy as np

from stabinv import plants
from stabinv.inversion import certify_inverse, exact_right_inverse
from stabinv.lti import invariant_zeros
from stabinv.polymat import column
from stabinv.ratcore import RatFn, S
from stabinv.sim import simulate_exact

P = plants.ex1_plant()
print("plant zeros:", [round(z.z.real, 4) for z in invariant_zeros(P).all])

Xi = exact_right_inverse(P)
print("P Xi P == P:", P @ Xi @ P == P)

# Multiplying by (s-1)/(s+4) makes the desired output vanish at the RHP zero.
good = P @ column([RatFn(1, S + 1), RatFn(1, S + 2)]) * RatFn(S - 1, S + 4)
# A generic output does not vanish at s = 1, so its input has a pole there.
bad = column([RatFn(1, S + 1), RatFn(0)])

for name, Y in (("interpolating", good), ("generic", bad)):
    rep = certify_inverse(P, Y)
    tr = simulate_exact(P, Xi, Y, t_final=30.0, dt=1e-2)
    print(f"{name:>13}: class={rep.classification} input poles="
          f"{sorted(round(p.real, 3) for p in rep.certificate)} "
          f"max|u|={np.max(np.abs(tr.u)):.3g} diverged={tr.diverged}")
