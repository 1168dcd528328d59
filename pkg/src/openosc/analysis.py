"""Decoherence, thermal interpretation of the relaxed state and singular scans."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from . import gauss, grid, ladder
from .diffop import DiffOp
from .moments import derive_moment_system
from .params import NEAR_CRITICAL, ModelParams, omega_nu, require_valid

# --- small entire functions -----------------------------------------------------


def _cos_and_sinc(w2: float, t):
    """cos(w t) and sin(w t)/w for real w^2 of either sign, smooth through w^2 = 0."""
    t = np.asarray(t, float)
    arg = w2 * t * t
    small = np.abs(arg) < 1e-3
    c = np.empty_like(t)
    s = np.empty_like(t)
    # Taylor series up to (w t)^8
    a = arg[small]
    c[small] = 1 - a / 2 + a**2 / 24 - a**3 / 720 + a**4 / 40320
    s[small] = t[small] * (1 - a / 6 + a**2 / 120 - a**3 / 5040 + a**4 / 362880)
    big = ~small
    if w2 > 0:
        w = math.sqrt(w2)
        c[big] = np.cos(w * t[big])
        s[big] = np.sin(w * t[big]) / w
    elif w2 < 0:
        w = math.sqrt(-w2)
        c[big] = np.cosh(w * t[big])
        s[big] = np.sinh(w * t[big]) / w
    return c, s


def f_envelope(t, nu: float):
    """e^{-nu t/2} (cos w t - nu/(2w) sin w t), w^2 = 1 - nu^2/4, continuous at nu = 2."""
    t = np.asarray(t, float)
    c, s = _cos_and_sinc(1 - nu * nu / 4, t)
    return np.exp(-nu * t / 2) * (c - nu / 2 * s)


def classical_trajectory(x_i: float, p_i: float, nu: float, t):
    """Damped oscillator x(t) for x(0) = x_i, x'(0) = p_i (per unit mass).

    Returns ``(x, x_regular)``: the exact solution, evaluated with entire
    functions so it is smooth through nu = 2, and the secular approximation
    e^{-nu t/2}[x_i + t(p_i + nu x_i/2)] that is exact at nu = 2.
    """
    t = np.asarray(t, float)
    c, s = _cos_and_sinc(1 - nu * nu / 4, t)
    env = np.exp(-nu * t / 2)
    drive = p_i + nu * x_i / 2
    x = env * (x_i * c + drive * s)
    x_reg = env * (x_i + t * drive)
    return x, x_reg


def classical_trajectory_printed(x_i: float, p_i: float, nu: float, t):
    """Direct complex evaluation of the two-exponential closed form (singular at nu = 2)."""
    t = np.asarray(t, float)
    w = omega_nu(nu)
    a = x_i * 1j * w
    b = p_i + nu / 2 * x_i
    val = np.exp(-nu * t / 2) / (2j * w) * (np.exp(1j * w * t) * (a + b) + np.exp(-1j * w * t) * (a - b))
    return val.real


# --- decoherence -------------------------------------------------------------------


@dataclass(frozen=True)
class DecoherenceQuery:
    w: complex
    z_obs: float
    z_prep: float = 0.0
    delta_z: float | None = None  # None: no filter
    t_prep: float = 0.0
    t_obs: float = 0.0

    def __post_init__(self):
        if self.delta_z is not None and not self.delta_z > 0:
            raise ValueError("delta_z must be positive or None")
        if not (math.isfinite(self.t_prep) and math.isfinite(self.t_obs)):
            raise ValueError("times must be finite")
        if self.t_obs < self.t_prep:
            raise ValueError("t_obs must not precede t_prep")

    @property
    def lag(self) -> float:
        return self.t_obs - self.t_prep

    def to_dict(self) -> dict:
        d = asdict(self)
        d["w"] = [self.w.real, self.w.imag] if isinstance(self.w, complex) else [float(self.w), 0.0]
        return d


P2_SOURCES = ("R2-printed", "R2", "p2")


def _p2_value(p: ModelParams, source: str) -> float:
    if source == "R2-printed":
        return gauss.printed_relaxed_parameters(p).R2
    if source == "R2":
        return gauss.relaxed_parameters(p).R2
    if source == "p2":
        return p.p2()
    raise ValueError(f"unknown p2 source {source!r}")


@dataclass
class ClosedFormTerms:
    gaussian: float
    oscillation: float
    bracket: float

    @property
    def value(self) -> float:
        return self.gaussian * self.oscillation * self.bracket


def closed_form_terms(q: DecoherenceQuery, p: ModelParams, p2_source: str = "R2-printed") -> ClosedFormTerms:
    w = complex(q.w)
    gaussian = math.exp(-0.5 * _p2_value(p, p2_source) * q.z_obs**2)
    _, p_mean = ladder.coherent_first_moments(w, q.t_obs, p)
    osc = math.cos(float(np.real(p_mean)) * q.z_obs)
    if q.delta_z is None:
        bracket = 2.0
    else:
        f = float(f_envelope(q.lag, p.nu))
        bracket = sum(math.exp(-((q.z_prep + s * q.z_obs * f) ** 2) / q.delta_z**2) for s in (1, -1))
    return ClosedFormTerms(gaussian, osc, bracket)


def _filtered_state(q: DecoherenceQuery, p: ModelParams) -> list[gauss.GaussPolyState]:
    """rho_w evolved exactly to t_prep, times each filter Gaussian."""
    ls = ladder.ladder_operators(p)
    w = complex(q.w)
    wp = w * np.exp(ls.shifts["abar+"] * q.t_prep)
    wm = np.conj(w) * np.exp(ls.shifts["abar-"] * q.t_prep)
    st = ladder.w_coherent_state(wp, wm, p)
    if q.delta_z is None:
        return [st.scale(2.0)]
    a = 2 / q.delta_z**2
    out = []
    for s in (1, -1):
        # exp(-(x_d - s z)^2 / dz^2)
        M = np.array([[0, 0], [0, a]])
        v = np.array([0, a * s * q.z_prep])
        out.append(st.multiply_gaussian(M, v, -(q.z_prep**2) / q.delta_z**2))
    return out


def _shift_trace(st: gauss.GaussPolyState, op: DiffOp) -> complex:
    return gauss.trace(gauss.WeylOp.exp_of(op)(st))


def weyl_exact(q: DecoherenceQuery, p: ModelParams) -> float:
    """Tr[O_z(t_obs) P_z(t_prep) rho_w] with every exponential applied exactly."""
    pd_h = ladder.heisenberg_evolve(DiffOp.p_d(), q.lag, p)
    total = 0j
    for st in _filtered_state(q, p):
        for s in (1, -1):
            total += 0.5 * _shift_trace(st, (s * 1j * q.z_obs) * pd_h)
    return float(total.real)


def grid_decoherence(q: DecoherenceQuery, p: ModelParams, N: int = 128,
                     L: float = 8.0, L_d: float | None = None, extrapolate: bool = False) -> float:
    """Same quantity from a lattice evolution between t_prep and t_obs.

    With ``extrapolate`` the run is repeated on a grid of 2N points per axis and
    the two values are combined by Richardson extrapolation, (4 v_2N - v_N) / 3,
    which cancels the h^2 truncation term of the stencil.
    """
    spread = max(abs(q.z_obs), abs(q.z_prep), 1.0)
    L_d = max(L, 8 * spread) if L_d is None else L_d
    if extrapolate:
        coarse = grid_decoherence(q, p, N, L, L_d)
        fine = grid_decoherence(q, p, 2 * N, L, L_d)
        return (4 * fine - coarse) / 3
    g = grid.GridSpec(N, L, L_d)
    if q.delta_z is not None and q.delta_z < 2 * g.h_d:
        raise ValueError(f"filter width {q.delta_z} is below the grid resolution {g.h_d:.3g}")
    total = 0.0
    field = None
    for st in _filtered_state(q, p):
        f = grid.GridField.sample(st, g, q.t_prep)
        field = f if field is None else grid.GridField(field.values + f.values, g, q.t_prep)
    if q.lag > 0:
        field = grid.evolve(field, p, q.lag).field
    # integral over x at each off-diagonality x_d_j
    rows = field.values.sum(axis=0) * g.h
    spline_re = CubicSpline(g.xd, rows.real)
    spline_im = CubicSpline(g.xd, rows.imag)
    for s in (1, -1):
        total += 0.5 * (spline_re(s * q.z_obs) + 1j * spline_im(s * q.z_obs))
    return float(np.real(total))


def decoherence_expectation(q: DecoherenceQuery, p: ModelParams, method: str = "weyl-exact",
                            **kwargs) -> float:
    require_valid(p)
    if method == "closed-form":
        return closed_form_terms(q, p, **kwargs).value
    if method == "weyl-exact":
        return weyl_exact(q, p)
    if method == "grid":
        return grid_decoherence(q, p, **kwargs)
    raise ValueError(f"unknown method {method!r}")


def effective_shift(q: DecoherenceQuery, p: ModelParams) -> float:
    """Coefficient of x_d in the Heisenberg-evolved p_d divided by the i from p_d = -i grad_d.

    exp(-i z p_d,H) shifts the off-diagonality by z times the x_d-gradient
    coefficient; this returns that factor, to compare with f(t_obs - t_prep).
    """
    pd_h = ladder.heisenberg_evolve(DiffOp.p_d(), q.lag, p)
    return float(np.real(1j * complex(pd_h[(0, 0, 0, 1)])))


@dataclass
class DecoherenceAudit:
    """Factor-by-factor comparison of the closed form with the exact value."""

    exact: float
    closed_form: float
    gaussian_closed: float
    gaussian_exact: float
    shift_factor_exact: float
    shift_factor_closed: float

    @property
    def discrepancy(self) -> float:
        return abs(self.exact - self.closed_form)

    def to_dict(self) -> dict:
        return {**asdict(self), "discrepancy": self.discrepancy}


def audit(q: DecoherenceQuery, p: ModelParams, p2_source: str = "R2-printed") -> DecoherenceAudit:
    terms = closed_form_terms(q, p, p2_source)
    return DecoherenceAudit(
        exact=weyl_exact(q, p), closed_form=terms.value,
        gaussian_closed=terms.gaussian,
        gaussian_exact=math.exp(-0.5 * p.p2() * q.z_obs**2),
        shift_factor_exact=effective_shift(q, p),
        shift_factor_closed=float(f_envelope(q.lag, p.nu)))


# --- thermal interpretation ------------------------------------------------------

@dataclass(frozen=True)
class ThermalReport:
    ell_T2_printed: float
    ell_T2: float
    beta_omega_printed: float | None
    beta_omega: float | None
    beta_omega_weak: float | None
    classification: str
    ell_dec_rho: float
    tanh_half_beta: float

    def to_dict(self) -> dict:
        return asdict(self)


def thermal_map(p: ModelParams, tol: float = 1e-10) -> ThermalReport:
    """Match rho_0 with a Gibbs kernel of the closed oscillator.

    The Gibbs kernel is exp(-x^2 tanh(b/2)/l^2 - x_d^2 coth(b/2)/(4 l^2)), so
    tanh(b/2) = Q/(2R) and l^2 = 1/(QR); the imaginary x x_d term of rho_0 has no
    Gibbs counterpart and is left out of the match.
    """
    require_valid(p)
    r = gauss.relaxed_parameters(p)
    Q, R = math.sqrt(r.Q2), math.sqrt(r.R2)
    k = p.kappa
    th = Q / (2 * R)
    root = math.sqrt(1 + p.d0 * p.d2 * k * k)
    printed = None
    if root > k:
        printed = math.log((root + k) / (root - k))
    beta = 2 * math.atanh(th) if th < 1 else None
    weak = math.log((1 + k) / (1 - k)) if k < 1 else None
    if abs(Q - 2 * R) <= tol * max(1.0, Q):
        cls = "pure-ground-state"
    elif beta is not None and beta > 0:
        cls = "thermal"
    else:
        cls = "non-thermal"
    return ThermalReport(ell_T2_printed=1 / math.sqrt(1 + 4 * p.d0 * p.d2), ell_T2=1 / (Q * R),
                         beta_omega_printed=printed, beta_omega=beta, beta_omega_weak=weak,
                         classification=cls, ell_dec_rho=math.sqrt(2 * k), tanh_half_beta=th)


def gibbs_kernel(x, xd, ell2: float, beta_omega: float):
    """Trace-normalized Gibbs density matrix of the closed oscillator in (x, x_d)."""
    th = math.tanh(beta_omega / 2)
    x = np.asarray(x, float)
    xd = np.asarray(xd, float)
    norm = math.sqrt(th / (math.pi * ell2))
    return norm * np.exp(-x * x * th / ell2 - xd * xd / (4 * th * ell2))


def gibbs_deviation(p: ModelParams, half_width: float = 6.0, n: int = 121) -> float:
    """max |rho_0 - Gibbs| on a square, using the reference temperature and length."""
    rep = thermal_map(p)
    if rep.beta_omega_printed is None:
        raise ValueError("no temperature: the relaxed state is not thermal")
    xs = np.linspace(-half_width, half_width, n)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    rho = gauss.relaxed_state(p)(X, Y)
    gib = gibbs_kernel(X, Y, rep.ell_T2_printed, rep.beta_omega_printed)
    return float(np.max(np.abs(rho - gib)))


# --- scans --------------------------------------------------------------------------

def weak_coupling_direction(kappa: float) -> ModelParams:
    """Unit-scale parameters with nu/(d0 + d2) = kappa and d0 = d2 = 1/2."""
    return ModelParams(kappa, 0.5, 0.5, 0.0)


WEAK_COLUMNS = ("g", "nu", "d0", "d2", "Q2", "R2", "S2", "energy", "beta_omega",
                "beta_omega_printed", "abar_plus_dist", "abar_minus_dist", "x_classical_t1")


def weak_coupling_scan(kappa: float, g_list, base: ModelParams | None = None) -> list[dict]:
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    g_list = list(g_list)
    if any(g <= 0 for g in g_list) or any(a <= b for a, b in zip(g_list, g_list[1:])):
        raise ValueError("g_list must be positive and strictly descending")
    base = weak_coupling_direction(kappa) if base is None else base
    rows = []
    for g in g_list:
        p = base.scaled(g)
        r = gauss.relaxed_parameters(p)
        th = thermal_map(p)
        dist = ladder.weak_coupling_limit_distance(p)
        ms = derive_moment_system(p)
        x1 = float(ms.first_moments(np.array([1.0, 0.0]), 1.0)[0])
        rows.append({"g": g, "nu": p.nu, "d0": p.d0, "d2": p.d2, "Q2": r.Q2, "R2": r.R2, "S2": r.S2,
                     "energy": (p.x2() + p.p2()) / 2, "beta_omega": th.beta_omega,
                     "beta_omega_printed": th.beta_omega_printed,
                     "abar_plus_dist": dist["abar+"], "abar_minus_dist": dist["abar-"],
                     "x_classical_t1": x1})
    return rows


CRITICAL_COLUMNS = ("nu", "distance", "z_abs2", "x_coherent_t1", "x_coherent_t1_printed",
                    "x_classical_t1")


def critical_damping_scan(nu_list, rest: ModelParams, t_probe: float = 1.0) -> dict:
    """|z|^2 growth, regularized coherent moments and classical continuity around nu = 2."""
    nus = np.asarray(sorted(nu_list), float)
    if np.any(np.abs(nus - 2) < NEAR_CRITICAL):
        raise ValueError("nu_list must stay away from the critical point")
    rows = []
    for nu in nus:
        p = ModelParams(nu, rest.d0, rest.d2, rest.beta)
        sp = ladder.spectrum(nu)
        w = abs(2 - nu) ** 0.25
        x_c, _ = ladder.coherent_first_moments(w, t_probe, p)
        x_c = float(np.real(x_c))
        x_pr, _ = ladder.printed_coherent_moments(w, t_probe, p)
        x_cl, _ = classical_trajectory(1.0, 0.0, nu, t_probe)
        rows.append({"nu": float(nu), "distance": float(abs(2 - nu)), "z_abs2": abs(sp.z) ** 2,
                     "x_coherent_t1": x_c, "x_coherent_t1_printed": float(x_pr),
                     "x_classical_t1": float(x_cl)})
    fits = {}
    for side, sel in (("below", nus < 2), ("above", nus > 2), ("both", np.ones_like(nus, bool))):
        d = np.abs(2 - nus[sel])
        if d.size < 2:
            continue
        zz = np.array([r["z_abs2"] for r, s in zip(rows, sel) if s])
        near = d <= 100 * d.min()  # two decades nearest the critical point
        if near.sum() >= 2:
            fits[side] = float(np.polyfit(np.log(d[near]), np.log(zz[near]), 1)[0])
    return {"rows": rows, "z_abs2_exponent": fits}


def classical_continuity_gap(delta: float = 1e-3, t_max: float = 5.0, x_i: float = 1.0,
                             p_i: float = 0.0, n: int = 501) -> float:
    t = np.linspace(0, t_max, n)
    lo, _ = classical_trajectory(x_i, p_i, 2 - delta, t)
    hi, _ = classical_trajectory(x_i, p_i, 2 + delta, t)
    return float(np.max(np.abs(hi - lo)))


# --- output ----------------------------------------------------------------------------

def write_table_csv(path: str | Path, rows: list[dict], columns=None, units: str = "dimensionless") -> None:
    columns = list(columns or (rows[0].keys() if rows else []))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"{c} [{units}]" for c in columns])
        for r in rows:
            w.writerow(["" if r[c] is None else (f"{r[c]:.12g}" if isinstance(r[c], float) else r[c])
                        for c in columns])


def write_json(path: str | Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True, default=_json_default))


def _json_default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")
