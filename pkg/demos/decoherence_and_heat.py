"""Decoherence functional three ways, then the thermal reading of the relaxed state."""

import math

from openosc import analysis
from openosc.params import ModelParams

p = ModelParams(1.0, 1.0, 1.0)
q = analysis.DecoherenceQuery(w=0.3 + 0.2j, z_obs=0.8, z_prep=0.2, delta_z=1.0, t_prep=0.3, t_obs=1.0)
for method in ("closed-form", "weyl-exact", "grid"):
    print(f"{method:12s}", analysis.decoherence_expectation(q, p, method))
print("closed form with the stationary <p^2>:", analysis.closed_form_terms(q, p, "p2").value)
print("audit:", analysis.audit(q, p).to_dict())

for g in (1e-1, 1e-2, 1e-3):
    rep = analysis.thermal_map(analysis.weak_coupling_direction(0.5).scaled(g))
    print(f"g={g:g}: beta_omega={rep.beta_omega:.12f} (ln 3 = {math.log(3):.12f}), {rep.classification}")
print("d2 = 0:", analysis.thermal_map(ModelParams(1.0, 1.0, 0.0)).classification)
