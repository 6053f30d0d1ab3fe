"""
Full effective Hamiltonian
==========================

The master equation written as a Schrodinger equation on system x
auxiliary space, for a decaying qubit and for the open Rabi model.
"""

import numpy as np

from openrabi import ModelParams, build_full_effective_hamiltonian, tensor_decomposition_residual
from openrabi.model import build_phenomenological_hamiltonian
from openrabi.vectorized import full_vs_phenomenological, tls_collapse_effect_demo

# %%
# Decaying qubit: the collapse entry leaves the spectrum alone and only
# rotates the population mode.
demo = tls_collapse_effect_demo(1.0, 0.1)
print("eigenvalues:", np.round(demo.eigenvalues_with, 6))
print("zero mode with collapse      :", np.round(demo.stationary_with.real, 4))
print("-2i gamma mode with collapse :", np.round(demo.population_mode_with.real, 4))
print("-2i gamma mode without       :", np.round(demo.population_mode_without.real, 4))

# %%
# Open Rabi model, cutoff 4 per boson: 25 levels in every (p_s, p_a) sector.
for g in (0.0, 0.5):
    params = ModelParams(nu_q=0.8, g=g, kappa_c2=1 / 40)
    for comp in full_vs_phenomenological(params, 4):
        print(f"g={g}: sector {tuple(int(x) for x in comp.sector)}  with/without collapse max shift "
              f"{comp.mismatch.max():.2e}")

# %%
# omega_m - omega_n^* reproduces the full spectrum only at g = 0.
for g in (0.0, 0.5):
    params = ModelParams(nu_q=0.8, g=g, kappa_c2=1 / 40)
    full = np.linalg.eigvals(build_full_effective_hamiltonian(params, 4).block(1, 1))
    reduced = np.linalg.eigvals(build_phenomenological_hamiltonian(params, 1, 4))
    print(f"g={g}: decomposition residual {tensor_decomposition_residual(full, reduced).max:.2e}")
