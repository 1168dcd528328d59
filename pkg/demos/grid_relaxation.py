"""Finite-difference evolution of a coherent state toward the relaxed state."""

import numpy as np

from openosc import gauss, grid, ladder
from openosc.params import ModelParams

p = ModelParams(1.0, 1.0, 1.0)
g = grid.GridSpec(N=64, L=8.0)
w = 0.5 + 0.2j
field = grid.GridField.sample(ladder.w_coherent_state(w, None, p), g)
res = grid.evolve(field, p, 5.0, sample_every=0.5, probes=grid.trajectory_probes())
x_exact, _ = ladder.coherent_first_moments(w, res.times, p)
for t, xg, xe in zip(res.times, res.samples["x"].real, x_exact.real):
    print(f"t={t:4.1f}  <x> grid {xg:+.5f}  exact {xe:+.5f}")
print("diagnostics:", res.diagnostics())

rho0 = gauss.relaxed_state(p)
print("distance to relaxed state at t=5:",
      np.max(np.abs(res.field.values - grid.GridField.sample(rho0, g).values)))
