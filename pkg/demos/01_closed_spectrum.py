"""
Closed Rabi spectrum from the determinant recursion
===================================================

Roots of the leading-minor recursion G_p(omega) in each parity sector,
compared with a dense eigensolve of the same tridiagonal block.
"""

import numpy as np

from openrabi import ModelParams, build_closed_parity_hamiltonian, find_closed_eigenfrequencies
from openrabi.spectrum import sturm_count_below

# %%
# The benchmark point: nu_q = 0.8 nu_c and a coupling in the ultrastrong regime.
params = ModelParams(nu_q=0.8, g=0.5)
n_max = 40

# %%
# Sturm counts tell how many levels lie below a trial frequency, which is
# how the root scan knows it found every sign change in a window.
for omega in (-1.0, 0.0, 1.0, 2.0):
    print(f"levels below {omega:+.1f}: even {sturm_count_below(params, 1, omega, n_max)}, "
          f"odd {sturm_count_below(params, -1, omega, n_max)}")

# %%
# Recursion roots next to eigvalsh.
for p in (1, -1):
    spec = find_closed_eigenfrequencies(params, p, n_max, window=(-1.0, 3.5))
    dense = np.linalg.eigvalsh(build_closed_parity_hamiltonian(params, p, n_max))
    print(f"\nparity {p:+d}")
    for (n, _), w in spec:
        print(f"  |{n}_g> {w.real:+.12f}   dense {dense[n]:+.12f}   diff {abs(w.real - dense[n]):.1e}")

# %%
# Weak coupling: the ground level follows -nu_q/2 - g^2/(nu_c + nu_q).
for g in (0.02, 0.05, 0.1):
    w0 = find_closed_eigenfrequencies(ModelParams(nu_q=0.8, g=g), 1, 30, window=(-1, 0.5)).omega[0].real
    print(f"g={g:.2f}: ground {w0:+.8f}, second order {-0.4 - g**2 / 1.8:+.8f}")
