"""Relaxed state of the damped oscillator: widths, moments and the moment equations."""

from openosc import gauss
from openosc.diffop import build_generator
from openosc.moments import derive_moment_system
from openosc.params import ModelParams, derived_scales

p = ModelParams(nu=1.0, d0=1.0, d2=1.0, beta=0.0)
L = build_generator(p)

stationary = gauss.relaxed_parameters(p)
printed = gauss.printed_relaxed_parameters(p)
print("stationary widths :", stationary)
print("reference widths  :", printed)
for label, r in (("stationary", stationary), ("reference", printed)):
    state = gauss.gaussian_state(r.Q2, r.R2, r.S2)
    print(f"  |L rho| for the {label} widths: {gauss.max_coefficient(gauss.apply(L, state)):.3g}")

rho0 = gauss.relaxed_state(p)
print("trace              :", gauss.trace(rho0).real)
print("<x^2>, <p^2>       :", gauss.expectation("xx", rho0).real, gauss.expectation("pp", rho0).real)

ms = derive_moment_system(p)
print("drift matrix A     :\n", ms.A)
print("stationary Sigma   :\n", ms.stationary_covariance())
print("scales             :", derived_scales(p).to_dict())
