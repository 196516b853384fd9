"""H-infinity norm and bounded-real certificates for the example plant.

Closes the loop with a first-order controller, computes the norm by the
Hamiltonian level test, compares it with a dense frequency grid, then builds
certificates just above the norm (Riccati and LMI) and shows that both
searches fail just below it.
"""
import numpy as np

from hinfland import Controller, assemble_closed_loop, example_plant, hinf_norm
from hinfland.certificate import certify_lmi, certify_riccati
from hinfland.norm import hinf_norm_grid_oracle

plant = example_plant()
k = Controller.from_blocks(DK=[[-0.5]], CK=[[1.0]], BK=[[0.3]], AK=[[-1.2]])
cl = assemble_closed_loop(plant, k)

res = hinf_norm(cl)
print(f"norm            {res.gamma:.12f}")
print(f"peak freqs      {res.peak_omegas}")
print(f"grid oracle     {hinf_norm_grid_oracle(cl):.12f}")

for factor in (1.01, 0.99):
    g = factor * res.gamma
    ric = certify_riccati(cl, None, g)
    lmi = certify_lmi(cl, None, g)
    print(f"gamma = {factor} * norm: riccati {'ok' if ric else 'fails'}, lmi {'ok' if lmi else 'fails'}")
    if ric:
        print("  P =", np.array2string(ric.P, precision=5))
