"""Certified descent directions from the convex lifting.

Computes the reference optimum by bisection over the lifted set, then takes
a suboptimal controller, joins the two lifted points with a straight segment
and maps the segment back. The certified level falls linearly along the
curve and its tangent at the start is a descent direction for J.
"""
import numpy as np

from hinfland import Controller, example_plant
from hinfland.lifting import CertifiedTriple, certified_triple, descent_curve, descent_direction
from hinfland.norm import J, directional_derivative_fd
from hinfland.synthesis import min_gamma

plant = example_plant()
syn = min_gamma(plant)
print(f"gamma* = {syn.gamma_star:.7f} (sqrt(3) - 1 = {np.sqrt(3) - 1:.7f}), {syn.probes} probes")
best = CertifiedTriple(syn.k_star, syn.cert.P, syn.gamma_star)

k = Controller.from_blocks(DK=[[0.8]], CK=[[1.0]], BK=[[-1.0]], AK=[[-1.5]])
t = certified_triple(plant, k)
print(f"start J = {t.gamma:.6f}")
print(" s     level     J(K(s))")
for s in np.linspace(0, 1, 6):
    ts = descent_curve(t, best, plant, s)
    print(f"{s:4.1f}  {ts.gamma:.6f}  {J(plant, ts.k):.6f}")

V = descent_direction(t, best, plant)
d = directional_derivative_fd(plant, k, V / np.linalg.norm(V))
print(f"directional derivative along V: {d.value:.4f}")
