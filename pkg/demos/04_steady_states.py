"""
Steady states and eigenmode weights
===================================

Null space of the parity-resolved generator, cross-checked by propagating
for a very long time, plus the weights of |2,g> on the open eigenmodes.
"""

import numpy as np

from openrabi import ModelParams, observables, steady_state
from openrabi.lindblad import modemap_over_sweep, propagate, relax_to_steady_state
from openrabi.model import basis_projector

params = ModelParams(nu_q=0.8, kappa_c2=1 / 40)
rho0 = basis_projector("2,g", 9)

# %%
# At g = 0 each diagonal sector has a two-dimensional null space; the state
# reached depends on where the initial condition starts.
print("null dimensions at g=0:", {k: len(v) for k, v in steady_state(params, 9).null_basis.items()})

# %%
# Null space vs long-time propagation.
for g in (0.0, 0.1, 0.5, 1.0):
    ss = steady_state(params.replace(g=g), 9, rho0)
    relaxed, t_end = relax_to_steady_state(rho0, params.replace(g=g), 9)
    print(f"g={g:.1f}: photon {ss.observables[0]:.6f}  qubit {ss.observables[1]:.6f}  "
          f"(relaxation agrees to {np.max(np.abs(np.subtract(observables(relaxed), ss.observables))):.1e})")

# %%
# Populations after ten two-photon lifetimes peak near g ~ kappa_c2, while
# the true steady state grows monotonically with g.
t = 10 / params.kappa_c2
for g in np.linspace(0, 0.1, 11):
    snap = observables(propagate(rho0, params.replace(g=g), 9, t))
    ss = steady_state(params.replace(g=g), 9, rho0).observables
    print(f"g={g:.2f}: photon+qubit at t=10/kappa {snap[0] + snap[1]:.4f}   steady {ss[0] + ss[1]:.5f}")

# %%
# Weights of |2,g> on the tracked even-parity modes.
mm = modemap_over_sweep(2, 1, params, np.linspace(0, 1, 101), 9)
for i in (0, 10, 30, 60, 100):
    print(f"g={mm.g[i]:.1f}: " + "  ".join(f"{w:.3f}" for w in mm.weights[:5, i]))
