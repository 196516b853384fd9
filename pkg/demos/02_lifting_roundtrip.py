"""Lifting a certified controller into the convex set and back.

A certified triple (K, P, gamma) maps to lifted coordinates where the
certificate condition is a pair of LMIs. The inverse map recovers the same
triple, and the congruence identities behind the change of variables hold
to rounding error.
"""
import numpy as np

from hinfland import Controller, example_plant
from hinfland.lifting import certified_triple, congruence_residuals, in_F, phi, psi

plant = example_plant()
k = Controller.from_blocks(DK=[[-0.5]], CK=[[1.0]], BK=[[0.3]], AK=[[-1.2]])
t = certified_triple(plant, k)
print(f"certified at gamma = {t.gamma:.10f}")
print("P =", np.array2string(t.P, precision=6))

lp = phi(t, plant)
for name in ("Xi", "X", "Y", "M", "H", "F", "G"):
    print(f"  {name:2s} = {getattr(lp, name).ravel()}")
print("in lifted set:", in_F(lp.Z, plant))

back = psi(lp.Xi, lp.Z, plant)
print("controller error after round trip:", np.abs(back.k.K - t.k.K).max())
print("P error after round trip:         ", np.abs(back.P - t.P).max())
r = congruence_residuals(t, plant)
print("congruence residuals:", {key: f"{v:.1e}" for key, v in r.items()})
