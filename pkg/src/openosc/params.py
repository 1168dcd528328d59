"""Model parameters of the open harmonic oscillator and derived scales.

All quantities are dimensionless: time in units of 1/omega, lengths in units
of the classical length sqrt(hbar/(m omega)).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

#: |nu - 2| below this is treated as the critical (degenerate) point.
NEAR_CRITICAL = 1e-6


class InvalidParameters(ValueError):
    """Raised when a parameter set violates a hard invariant."""


@dataclass(frozen=True)
class ModelParams:
    """Dimensionless environment parameters.

    ``alpha`` is the gauge parameter of the total-derivative term. It is kept
    for bookkeeping only and must stay zero.
    """

    nu: float
    d0: float
    d2: float
    beta: float = 0.0
    alpha: float = 0.0

    @property
    def dsum(self) -> float:
        return self.d0 + self.d2

    @property
    def kappa(self) -> float:
        return self.nu / self.dsum

    def x2(self) -> float:
        """Stationary second moment of the coordinate."""
        return self.dsum / (2 * self.nu)

    def p2(self) -> float:
        """Stationary second moment of the momentum."""
        return (self.d0 + self.d2 * (1 + self.nu**2)) / (2 * self.nu) - self.beta

    def scaled(self, g: float) -> "ModelParams":
        """Environment parameters multiplied by g**2 (weak-coupling family)."""
        g2 = g * g
        return ModelParams(self.nu * g2, self.d0 * g2, self.d2 * g2, self.beta * g2)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DimensionalInputs:
    """SI inputs. Rates are given per second, ``d0`` per second squared."""

    nu: float
    d0: float
    d2: float
    beta: float = 0.0
    m: float = 1.0
    omega: float = 1.0
    hbar: float = 1.0


@dataclass
class ValidationReport:
    failures: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    lindblad_ok: bool = False

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return {"ok": self.ok, "failures": self.failures,
                "warnings": self.warnings, "lindblad_ok": self.lindblad_ok}


@dataclass(frozen=True)
class ScalesReport:
    ell_cl: float
    ell_loc: float
    ell_inst2: float
    g_dec2: float
    omega_nu: complex
    kappa: float
    kappa0_printed: float
    kappa0_lindblad: float
    lindblad_ok: bool
    relaxation_time: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["omega_nu"] = [self.omega_nu.real, self.omega_nu.imag]
        return d


def relaxed_r2(p: ModelParams) -> float:
    """Off-diagonal Gaussian width parameter of the stationary state."""
    return p.dsum / (2 * p.nu) + p.d0 * p.d2 * p.nu / (2 * p.dsum) - p.beta


def validate(p: ModelParams) -> ValidationReport:
    rep = ValidationReport()
    vals = (p.nu, p.d0, p.d2, p.beta, p.alpha)
    if not all(math.isfinite(v) for v in vals):
        rep.failures.append("non-finite parameter")
        return rep
    if p.nu <= 0:
        rep.failures.append(f"nu must be positive (got {p.nu})")
    if p.d0 < 0 or p.d2 < 0:
        rep.failures.append("d0 and d2 must be non-negative")
    if p.alpha != 0:
        rep.failures.append("alpha (gauge term) must be zero")
    if p.nu > 0 and p.d0 >= 0 and p.d2 >= 0:
        if p.dsum <= 0:
            rep.failures.append("d0 + d2 must be positive for a normalizable relaxed state")
        else:
            if p.p2() <= 0:
                rep.failures.append(f"momentum second moment {p.p2():.6g} is not positive")
            elif relaxed_r2(p) <= 0:
                rep.failures.append(f"off-diagonal width R^2 = {relaxed_r2(p):.6g} is not positive")
        rep.lindblad_ok = p.nu**2 <= 2 * p.d0 * p.d2
        if not rep.lindblad_ok:
            rep.warnings.append("nu^2 > 2 d0 d2: generator is not of Lindblad form")
        if abs(p.nu - 2) < NEAR_CRITICAL:
            rep.warnings.append("nu is within 1e-6 of the critical value 2")
        elif p.nu >= 2:
            rep.warnings.append("over-damped regime (nu > 2)")
    return rep


def require_valid(p: ModelParams) -> None:
    rep = validate(p)
    if not rep.ok:
        raise InvalidParameters("; ".join(rep.failures))


def _positive(name: str, v: float) -> None:
    if not (math.isfinite(v) and v > 0):
        raise InvalidParameters(f"{name} must be finite and positive (got {v})")


def nondimensionalize(inp: DimensionalInputs) -> ModelParams:
    _positive("m", inp.m)
    _positive("omega", inp.omega)
    _positive("hbar", inp.hbar)
    w = inp.omega
    return ModelParams(nu=inp.nu / w, d0=inp.d0 / w**2, d2=inp.d2, beta=inp.beta / w)


def redimensionalize(p: ModelParams, m: float = 1.0, omega: float = 1.0,
                     hbar: float = 1.0) -> DimensionalInputs:
    w = omega
    return DimensionalInputs(nu=p.nu * w, d0=p.d0 * w**2, d2=p.d2, beta=p.beta * w,
                             m=m, omega=omega, hbar=hbar)


def classical_length(m: float = 1.0, omega: float = 1.0, hbar: float = 1.0) -> float:
    return math.sqrt(hbar / (m * omega))


def omega_nu(nu: float) -> complex:
    """sqrt(1 - nu^2/4), imaginary in the over-damped regime."""
    return complex(np.sqrt(complex(1 - nu * nu / 4)))


def derived_scales(p: ModelParams, m: float = 1.0, omega: float = 1.0,
                   hbar: float = 1.0) -> ScalesReport:
    ell_inst2 = 1 / p.p2()
    nu_max = math.sqrt(2 * p.d0 * p.d2)
    return ScalesReport(
        ell_cl=classical_length(m, omega, hbar),
        ell_loc=math.sqrt(p.dsum / (2 * p.nu)),
        ell_inst2=ell_inst2,
        g_dec2=1 / ell_inst2 - 0.5,
        omega_nu=omega_nu(p.nu),
        kappa=p.kappa,
        kappa0_printed=math.sqrt(2 * p.d0 * p.d2) / p.dsum,
        # largest nu allowed by nu^2 <= 2 d0 d2, divided by d0 + d2; never exceeds 1/sqrt(2)
        kappa0_lindblad=nu_max / p.dsum,
        lindblad_ok=p.nu**2 <= 2 * p.d0 * p.d2,
        relaxation_time=2 / p.nu,
    )


_KEYS = ("nu", "d0", "d2", "beta", "m", "omega", "hbar")


def params_from_mapping(data: dict) -> ModelParams:
    unknown = set(data) - set(_KEYS) - {"alpha"}
    if unknown:
        raise InvalidParameters(f"unknown parameter keys: {sorted(unknown)}")
    try:
        core = {k: float(data[k]) for k in ("nu", "d0", "d2")}
    except KeyError as exc:
        raise InvalidParameters(f"missing parameter {exc.args[0]!r}") from None
    core["beta"] = float(data.get("beta", 0.0))
    if any(k in data for k in ("m", "omega", "hbar")):
        return nondimensionalize(DimensionalInputs(
            **core, m=float(data.get("m", 1.0)), omega=float(data.get("omega", 1.0)),
            hbar=float(data.get("hbar", 1.0))))
    return ModelParams(**core, alpha=float(data.get("alpha", 0.0)))


def load_params(path: str | Path) -> ModelParams:
    """Read a JSON parameter file; dimensional keys are optional."""
    with open(path) as fh:
        return params_from_mapping(json.load(fh))
