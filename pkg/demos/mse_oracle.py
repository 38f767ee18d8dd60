"""
Where the error comes from
==========================

On a graph small enough to enumerate every pattern of link failures, the
closed-form MSE can be checked against the exact expectation and against
simulation. It also splits into a bias part (the mean state misses the
target) and a variance part (link failures scatter the state).
"""

import numpy as np

from bandctl import (BandSpec, DiffusionModel, Graph, bandlimiting_filter, graph_basis,
                     mse_closed_form, mse_coefficients, synthesize_bandlimited)
from bandctl.mse import gamma_brute_force, gamma_exact, mse_decomposed, mse_empirical
from bandctl.random_graph import rng_stream

# %%
# A five-node "house" (square with a roof), first three frequencies, two
# driving nodes. Six links give 2^6 = 64 failure patterns per step.
g = Graph(5, [(0, 1), (1, 2), (2, 3), (3, 0), (2, 4), (3, 4)])
model = DiffusionModel("laplacian").bind(g)
basis = graph_basis(g)
h = bandlimiting_filter(basis, 3)
target = synthesize_bandlimited(basis, BandSpec(np.array([1.0, 0.5, 0.25])))
sel, T = [0, 4], 3
controls = np.random.default_rng(0).normal(size=(T, len(sel)))

# %%
# Second-moment blocks: exact recursion vs enumerating every failure
# pattern over the remaining steps.
p = 0.7
diff = max(np.abs(gamma_exact(model, g, p, h, T, a, b) - gamma_brute_force(model, g, p, h, T, a, b)).max()
           for a in range(T) for b in range(T))
print(f"max |recursion - enumeration| = {diff:.1e}")

# %%
for p in (1.0, 0.9, 0.7, 0.5):
    coeffs = mse_coefficients(model, g, p, h, target, T)
    bias, var = mse_decomposed(coeffs, sel, controls)
    mc, se = mse_empirical(model, g, p, h, target, sel, controls, 20000, rng_stream(0, 9))
    print(f"p={p}: closed form {mse_closed_form(coeffs, sel, controls):.4f} "
          f"(bias {bias:.4f} + variance {var:.4f}), simulated {mc:.4f} +/- {se:.4f}")
