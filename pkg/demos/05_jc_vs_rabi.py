"""
Jaynes-Cummings baseline
========================

Closed-form JC doublets with two-photon decay against the open Rabi
branches.  The JC decay rates level off at strong coupling; the Rabi ones
keep growing.
"""

import numpy as np

from openrabi import ModelParams, jc_eigenfrequencies, jc_vs_rabi_comparison

params = ModelParams(nu_q=0.8, kappa_c2=1 / 40)

# %%
# A single doublet: the closed form is the 2x2 eigenproblem on {|n-1,e>, |n,g>}.
pair = jc_eigenfrequencies(params.replace(g=0.5), 3)
print("n=3 doublet:", pair.omega_upper, pair.omega_lower)

# %%
g = np.linspace(0, 4, 401)
cmp_ = jc_vs_rabi_comparison(params, g, 60, n_levels=4, slope_window=(2, 4))
print("\nslope of kappa on g in [2, 4], in units of kappa_c2")
for (n, p), sj, sr in zip(cmp_.labels, cmp_.slope_jc, cmp_.slope_rabi):
    print(f"  |{n}_g,{'+' if p == 1 else '-'}>  JC {sj / params.kappa_c2:+.4f}   Rabi {sr / params.kappa_c2:+.2f}")
