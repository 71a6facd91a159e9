"""Tracking an output that lies outside the image of a tall plant.

The 2x1 plant cannot produce arbitrary pairs of outputs, so the desired
step-plus-sinusoid has a component that no input reaches. T_p P^+ is a
stable approximate inverse. The persistent error it leaves is predicted
by projecting each spectral line of the desired output onto the column
span of P(j omega).
"""

import math

import numpy as np

from stabinv import plants
from stabinv.geometry import line_projection
from stabinv.lti import pseudo_inverse
from stabinv.polymat import membership_im
from stabinv.sim import simulate_closed_loop

P, Yd = plants.ex2_plant(), plants.ex2_desired()
print("P^+ =", pseudo_inverse(P))
print("desired output in image:", membership_im(P, Yd))

inv = plants.ex2_inverse()
print(f"gamma = {inv.synthesis.gamma:.3f}, T_p P^+ stable: {inv.is_stable()}")

lp = line_projection(P, Yd, inv.ss)
print(f"power {lp.power:.3f} = projected {lp.proj_power:.3f} + residual {lp.res_power:.4f}")
print(f"predicted error power with this inverse: {lp.error_power:.4f}")

tr = simulate_closed_loop(plants.ex2_scenario(t_final=100.0))
tail = tr.t >= tr.t[-1] - 10 * math.pi
print(f"simulated trailing error power: {np.mean(tr.e_norm[tail] ** 2):.4f}")
