"""
Relaxation of two and three cavity photons
==========================================

Master-equation runs from |2,g> and |3,g>.  Times are printed in units of
half a cavity round trip, T_c/2 = pi/(2 nu_c).
"""

import numpy as np

from openrabi import ModelParams, evolve
from openrabi.model import basis_projector

params = ModelParams(nu_q=0.8, kappa_c2=1 / 40)
t = np.linspace(0, 15 / params.kappa_c2, 1501)

# %%
# Decoupled cavity: pairs of photons leave, so two photons end in vacuum and
# three leave one photon behind.
for init in ("2,g", "3,g"):
    s = evolve(basis_projector(init, 9), params, 9, t).series
    print(f"g=0, {init}: photon number at the end {s.photon[-1]:.6f}")

# %%
# Weak coupling from |3,g>: a fast drop to about one excitation followed by
# slow leakage through the nearly dark |1_g,-> mode.
s = evolve(basis_projector("3,g", 9), params.replace(g=0.05), 9, t).series
for k in (0, 10, 50, 200, 500, 1000, 1500):
    print(f"t = {s.t_half_round_trip[k]:8.1f} T_c/2   photon {s.photon[k]:.4f}   qubit {s.qubit[k]:.4f}")
print("largest trace error", np.max(np.abs(s.trace - 1)), " smallest eigenvalue", np.min(s.min_eigenvalue))
