"""Ladder operators of the generator and the decaying eigenstates they build."""

import numpy as np

from openosc import gauss, ladder
from openosc.diffop import build_generator
from openosc.params import ModelParams

p = ModelParams(nu=1.0, d0=1.0, d2=1.0)
ls = ladder.ladder_operators(p)
print("lambda table :", {k: np.round(v, 6) for k, v in ls.spec.lambdas.items()})
print("pairing      :", ls.pairing)
print("diagonal form:", ladder.diagonal_form_check(p).to_dict())

L = build_generator(p)
for m, n in ((0, 0), (1, 0), (0, 1), (1, 1), (2, 1)):
    st = ladder.ladder_state(m, n, "a", p)
    omega = ladder.eigenvalue(m, n, p.nu)
    res = gauss.coefficient_residual(gauss.apply(L, st), st.scale(omega))
    print(f"rho_({m},{n}): eigenvalue {omega:.4f}, residual {res:.1e}, trace {gauss.trace(st):.3f}")

worst = max(ladder.printed_element_checks(p, "printed"), key=lambda c: c.error)
print("largest mismatch of the literal table reading:", worst.to_dict())

w = 0.5 + 0.2j
t = np.linspace(0, 4, 5)
x, p_mean = ladder.coherent_first_moments(w, t, p)
print("coherent <x(t)> :", np.round(x.real, 5))
print("coherent <p(t)> :", np.round(p_mean.real, 5))
