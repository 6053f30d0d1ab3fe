"""
Open spectrum over a coupling sweep
===================================

Complex eigenfrequencies omega = nu - i kappa of the phenomenological
Hamiltonian, followed from g = 0 by eigenvector overlap.
"""

import warnings

import numpy as np

from openrabi import ModelParams, find_open_eigenfrequencies, track_levels_over_sweep
from openrabi.spectrum import AmbiguousAssignmentWarning

params = ModelParams(nu_q=0.8, kappa_c2=1 / 40)
grid = np.linspace(0, 2, 201)

# %%
# At g = 0 each number state |m, p> decays at kappa_c2 m(m-1).
spec = find_open_eigenfrequencies(params, 1, 12)
for (n, _), w in list(spec)[:5]:
    print(f"|{n}_g,+>  nu = {w.real:+.3f}  kappa = {-w.imag:.4f}")

# %%
# Follow the lowest branches.  Near-degenerate steps are flagged rather than
# silently resolved by sorting.
with warnings.catch_warnings(record=True) as caught:
    warnings.simplefilter("always", AmbiguousAssignmentWarning)
    sweeps = {p: track_levels_over_sweep(params, p, grid, 40, n_levels=4) for p in (1, -1)}
for w in caught:
    print("note:", w.message)

# %%
# The |1_g,-> branch is dark at g = 0 and stays long-lived up to g ~ 0.5.
odd = sweeps[-1]
for g in (0.0, 0.2, 0.4, 0.5, 0.7, 1.0):
    i = int(np.argmin(np.abs(grid - g)))
    print(f"g={grid[i]:.2f}: kappa(|1_g,->) / kappa_c2 = {-odd.omega[1, i].imag / params.kappa_c2:.3f}")
