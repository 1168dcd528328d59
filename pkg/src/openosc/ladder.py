"""Ladder operators of the generator, basis changes and Heisenberg dynamics.

The ladder operators are linear in X = (x, p, x_d, p_d) and satisfy
``[L, A] = mu A`` with ``mu`` drawn from the table

    lambda(tau, tau') = -tau nu/2 + tau' i omega_nu,   omega_nu = sqrt(1 - nu^2/4).

Two readings of the reference operator list are supported. ``"printed"``
evaluates it literally. ``"resolved"`` swaps the first label of every
lambda (and uses lambda(+, -+) in the x_d term of a_+-), which is the
reading that yields exact eigen-operators. Which operator goes with which
eigenvalue is never assumed: it is measured from the commutator with L.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import gauss
from .diffop import DiffOp, build_generator, closed_ladder_ops, commutator
from .params import NEAR_CRITICAL, ModelParams, omega_nu, require_valid

LADDER_NAMES = ("a+", "a-", "abar+", "abar-")
LAMBDA_LABELS = ("++", "+-", "-+", "--")
BASES = ("X", "A", "B", "C")
READINGS = ("resolved", "printed")
IDENTITY_TOL = 1e-12


class DegenerateSpectrum(ValueError):
    """nu = 2: the ladder operators are singular."""


class LadderVerificationError(ArithmeticError):
    pass


def _sign(ch: str) -> int:
    return 1 if ch == "+" else -1


@dataclass(frozen=True)
class Spectrum:
    nu: float
    omega: complex
    lambdas: dict[str, complex]
    z: complex
    n_minus: complex
    degenerate: bool

    def lam(self, tau: int | str, taup: int | str) -> complex:
        tau = _sign(tau) if isinstance(tau, str) else tau
        taup = _sign(taup) if isinstance(taup, str) else taup
        return -tau * self.nu / 2 + taup * 1j * self.omega

    def to_dict(self) -> dict:
        cx = lambda c: [float(np.real(c)), float(np.imag(c))]
        return {"nu": self.nu, "omega_nu": cx(self.omega),
                "lambda": {k: cx(v) for k, v in self.lambdas.items()},
                "z": cx(self.z), "N_minus": cx(self.n_minus), "degenerate": self.degenerate}


def spectrum(nu: float) -> Spectrum:
    if nu < 0:
        raise ValueError("nu must be non-negative")
    w = omega_nu(nu)
    lams = {k: -_sign(k[0]) * nu / 2 + _sign(k[1]) * 1j * w for k in LAMBDA_LABELS}
    if abs(nu - 2) < NEAR_CRITICAL:
        return Spectrum(nu, w, lams, complex("nan+nanj"), complex("nan+nanj"), True)
    z = complex(np.sqrt(0.5 + nu / (4j * w)))
    nm = complex(np.sqrt(0.5 - nu / (4j * w)))
    return Spectrum(nu, w, lams, z, nm, False)


# --- operator construction ---------------------------------------------------

def _ladder_ops(p: ModelParams, reading: str) -> dict[str, DiffOp]:
    sp = spectrum(p.nu)
    if sp.degenerate:
        raise DegenerateSpectrum("ladder operators are singular at nu = 2")
    if reading not in READINGS:
        raise ValueError(f"unknown reading {reading!r}")
    flip = -1 if reading == "resolved" else 1
    x, xd, P, Pd = DiffOp.x(), DiffOp.xd(), DiffOp.p(), DiffOp.p_d()
    nu, d0, d2, beta = p.nu, p.d0, p.d2, p.beta
    ops = {}
    for s, norm in ((1, sp.z), (-1, sp.n_minus)):
        lam_a = sp.lam(flip, -s)          # printed lambda(+, -+)
        lam_b = sp.lam(-flip, -s)         # printed lambda(-, -+)
        lam_xd = sp.lam(1, -s) if reading == "resolved" else sp.lam(1, s)
        tag = "+" if s > 0 else "-"
        ops["a" + tag] = norm * (lam_a * x + 1j * (d0 * lam_a + d2 * lam_b) / (2 * nu) * P
                                 + 1j * (beta - p.dsum / (2 * nu) + d2 / 2 * lam_xd) * xd + Pd)
        ops["abar" + tag] = 1j * norm * (lam_a * P + xd)
    return {k: ops[k] for k in LADDER_NAMES}


def _eigen_shift(L: DiffOp, op: DiffOp) -> tuple[complex, float]:
    """Best scalar mu with [L, op] = mu op, and the coefficient residual."""
    c = commutator(L, op)
    keys = [m for m, v in op.items()]
    a = np.array([complex(op[m]) for m in keys])
    b = np.array([complex(c[m]) for m in keys])
    mu = complex(np.vdot(a, b) / np.vdot(a, a))
    return mu, (c - mu * op).max_abs()


def _match_label(sp: Spectrum, mu: complex) -> str:
    return min(LAMBDA_LABELS, key=lambda k: abs(sp.lambdas[k] - mu))


@dataclass
class LadderSet:
    params: ModelParams
    spec: Spectrum
    reading: str
    ops: dict[str, DiffOp]
    shifts: dict[str, complex]
    pairing: dict[str, str]
    shift_residuals: dict[str, float]
    commutators: np.ndarray
    vectors: np.ndarray = field(repr=False)

    @property
    def commutator_residual(self) -> float:
        return float(np.max(np.abs(self.commutators - np.eye(2))))

    @property
    def shift_residual(self) -> float:
        return max(self.shift_residuals.values())

    @property
    def verified(self) -> bool:
        return self.commutator_residual < IDENTITY_TOL and self.shift_residual < IDENTITY_TOL

    def pairing_record(self) -> dict:
        cx = lambda c: [float(np.real(c)), float(np.imag(c))]
        return {"reading": self.reading,
                "pairing": dict(self.pairing),
                "shift": {k: cx(v) for k, v in self.shifts.items()},
                "shift_residual": self.shift_residual,
                "commutator_residual": self.commutator_residual}


def ladder_operators(p: ModelParams, reading: str = "resolved", strict: bool | None = None) -> LadderSet:
    """Build and verify a_+-, abar_+- (cached per parameter set; treat as read-only).

    With ``strict`` (default for the resolved reading) a failed commutation or
    eigen-shift check raises :class:`LadderVerificationError`.
    """
    require_valid(p)
    strict = reading == "resolved" if strict is None else strict
    ls = _build_ladder_set(p, reading)
    if strict and not ls.verified:
        raise LadderVerificationError(
            f"ladder identities fail: commutator {ls.commutator_residual:.3g}, "
            f"eigen-shift {ls.shift_residual:.3g}")
    return ls


@functools.lru_cache(maxsize=256)
def _build_ladder_set(p: ModelParams, reading: str) -> LadderSet:
    ops = _ladder_ops(p, reading)
    sp = spectrum(p.nu)
    L = build_generator(p)
    shifts, pairing, res = {}, {}, {}
    for name, op in ops.items():
        mu, r = _eigen_shift(L, op)
        shifts[name] = mu
        pairing[name] = _match_label(sp, mu)
        res[name] = max(r, abs(mu - sp.lambdas[pairing[name]]))
    comm = np.zeros((2, 2), complex)
    for i, a in enumerate(("a+", "a-")):
        for j, ab in enumerate(("abar+", "abar-")):
            c = commutator(ops[a], ops[ab])
            rest = (c - c.constant()).max_abs()
            comm[i, j] = complex(c.constant()) + (rest if rest > 0 else 0)
    vecs = np.array([ops[k].linear_vector() for k in LADDER_NAMES])
    return LadderSet(p, sp, reading, ops, shifts, pairing, res, comm, vecs)


# --- bases ------------------------------------------------------------------------

def basis_vectors(basis: str, p: ModelParams) -> np.ndarray:
    """Rows: coefficient vectors of the basis operators over X."""
    if basis == "X":
        return np.eye(4, dtype=complex)
    if basis == "A":
        return ladder_operators(p).vectors
    if basis == "B":
        ops = gauss.b_operators(p)
        return np.array([ops[k].linear_vector() for k in ("b", "b_d", "bbar", "bbar_d")])
    if basis == "C":
        ops = closed_ladder_ops()
        return np.array([ops[k].linear_vector() for k in ("c+", "c-", "cbar+", "cbar-")])
    raise ValueError(f"unknown basis {basis!r}; expected one of {BASES}")


@dataclass(frozen=True)
class BasisTransform:
    """o = sum_o' T[o, o'] o' for o in ``source`` and o' in ``target``."""

    source: str
    target: str
    T: np.ndarray
    det: complex


def basis_transform(source: str, target: str, p: ModelParams) -> BasisTransform:
    T = basis_vectors(source, p) @ np.linalg.inv(basis_vectors(target, p))
    return BasisTransform(source, target, T, complex(np.linalg.det(T)))


# Entries of the reference tables, written as functions of the spectrum so the
# companion a_- entries (stated via complex conjugation) continue analytically
# to nu > 2: conjugation maps i -> -i, z -> N_-, lambda(t, t') -> lambda(t, -t').
_X_ROW = {"x": 0, "p": 1, "x_d": 2, "p_d": 3}
_A_COL = {"a+": 0, "a-": 1, "abar+": 2, "abar-": 3}
_B_COL = {"b": 0, "b_d": 1, "bbar": 2, "bbar_d": 3}


def _printed_entries(p: ModelParams, reading: str):
    sp = spectrum(p.nu)
    if sp.degenerate:
        raise DegenerateSpectrum("tables are singular at nu = 2")
    nu, d0, d2, beta, ds = p.nu, p.d0, p.d2, p.beta, p.dsum
    w = sp.omega
    flip = -1 if reading == "resolved" else 1

    def make(I, z, t2):
        def lam(t, tp):
            return sp.lam(flip * t, t2 * tp)
        K = ds**2 - ds * 2 * beta * nu + d0 * d2 * nu**2
        return {
            ("X", "x", "a"): I / (2 * z * w),
            ("X", "x", "abar"): z * (d0 * lam(1, -1) + d2 * lam(-1, -1)) / (2 * nu),
            ("X", "p", "a"): 0,
            ("X", "p", "abar"): 1 / (2 * z * w),
            ("X", "x_d", "a"): 0,
            ("X", "x_d", "abar"): -I * z,
            ("X", "p_d", "a"): z,
            ("X", "p_d", "abar"): z * (ds / (2 * nu) + d2 / 2 * lam(1, 1) - beta),
            ("B", "abar", "bbar"): z * math.sqrt(nu / ds) * lam(-1, 1),
            ("B", "abar", "bbar_d"): -z * np.sqrt(complex(nu / (ds * K))) * (d0 + d2 * (1 + nu * lam(-1, 1))),
        }

    plus = make(1j, sp.z, 1)
    minus = make(-1j, sp.n_minus, -1)
    # sign of the companion relation T_{o,-} = sign * T_{o,+}^*
    sign = {("X", "p", "abar"): -1, ("X", "x_d", "abar"): -1}
    out = {}
    for key, val in plus.items():
        table, row, col = key
        for tag, v in (("+", val), ("-", sign.get(key, 1) * minus[key])):
            # the ladder index sits on the column of the X table and on the row of the B table
            k = (table, row, col + tag) if table == "X" else (table, row + tag, col)
            out[k] = complex(v)
    return out


@dataclass
class ElementCheck:
    table: str
    row: str
    col: str
    printed: complex
    computed: complex

    @property
    def error(self) -> float:
        return abs(self.printed - self.computed)

    def to_dict(self) -> dict:
        return {"element": f"T[{self.row},{self.col}]", "table": self.table,
                "printed": [self.printed.real, self.printed.imag],
                "computed": [self.computed.real, self.computed.imag], "error": self.error}


def printed_element_checks(p: ModelParams, reading: str = "resolved") -> list[ElementCheck]:
    """Compare every reference T element with the computed transformation.

    The ``X`` table holds T[o, a] with o in X; the ``B`` table holds T[abar, b]
    with abar in A and b in B.
    """
    TXA = basis_transform("X", "A", p).T
    TAB = basis_transform("A", "B", p).T
    checks = []
    for (table, row, col), val in _printed_entries(p, reading).items():
        comp = TXA[_X_ROW[row], _A_COL[col]] if table == "X" else TAB[_A_COL[row], _B_COL[col]]
        checks.append(ElementCheck(table, row, col, val, complex(comp)))
    return checks


# --- generator ---------------------------------------------------------------

@dataclass
class DiagonalForm:
    coefficients: tuple[str, str]
    values: tuple[complex, complex]
    residual: float
    residual_op: DiffOp
    n_within_tol: int
    table: list[tuple[str, str, float]]

    def to_dict(self) -> dict:
        return {"coefficients": {"abar+ a+": self.coefficients[0], "abar- a-": self.coefficients[1]},
                "values": [[v.real, v.imag] for v in self.values],
                "residual": self.residual, "n_within_tol": self.n_within_tol}


def diagonal_form_check(p: ModelParams, tol: float = IDENTITY_TOL) -> DiagonalForm:
    """Search all lambda assignments for L = mu+ abar+ a+ + mu- abar- a-."""
    ls = ladder_operators(p)
    L = build_generator(p)
    n_plus = ls.ops["abar+"] * ls.ops["a+"]
    n_minus = ls.ops["abar-"] * ls.ops["a-"]
    lams = ls.spec.lambdas
    table = []
    best = None
    for kp, km in itertools.product(LAMBDA_LABELS, repeat=2):
        diff = L - (lams[kp] * n_plus + lams[km] * n_minus)
        r = diff.max_abs()
        table.append((kp, km, r))
        if best is None or r < best[2]:
            best = (kp, km, r, diff)
    n_ok = sum(1 for *_, r in table if r < tol)
    kp, km, r, diff = best
    if r >= tol:
        raise LadderVerificationError(f"no diagonal form within {tol} (best {r:.3g})")
    return DiagonalForm((kp, km), (lams[kp], lams[km]), r, diff, n_ok, table)


def closed_limit_residual() -> float:
    """|| L0 + i(cbar+ c+ - cbar- c-) || for the closed oscillator."""
    c = closed_ladder_ops()
    L0 = build_generator(ModelParams(0.0, 0.0, 0.0, 0.0))
    return (L0 + 1j * (c["cbar+"] * c["c+"] - c["cbar-"] * c["c-"])).max_abs()


# --- states -------------------------------------------------------------------

def eigenvalue(m: int, n: int, nu: float) -> complex:
    """-[nu/2 (m+n) + i omega_nu (m-n)]."""
    return -(nu / 2 * (m + n) + 1j * omega_nu(nu) * (m - n))


def ladder_state(m: int, n: int, basis: str, p: ModelParams) -> gauss.GaussPolyState:
    if m < 0 or n < 0:
        raise ValueError("indices must be non-negative")
    if basis == "b":
        return gauss.b_basis_state(m, n, p)
    if basis != "a":
        raise ValueError("basis must be 'a' or 'b'")
    ops = ladder_operators(p).ops
    st = gauss.relaxed_state(p)
    for _ in range(m):
        st = gauss.apply(ops["abar+"], st)
    for _ in range(n):
        st = gauss.apply(ops["abar-"], st)
    return st.scale(1 / math.sqrt(math.factorial(m) * math.factorial(n)))


def w_coherent_state(w_plus: complex, w_minus: complex | None, p: ModelParams) -> gauss.GaussPolyState:
    """exp(w+ abar+ + w- abar-) rho_0; ``w_minus=None`` gives the Hermitian choice conj(w+)."""
    if w_minus is None:
        w_minus = np.conj(w_plus)
    ops = ladder_operators(p).ops
    gen = w_plus * ops["abar+"] + w_minus * ops["abar-"]
    return gauss.WeylOp.exp_of(gen)(gauss.relaxed_state(p))


def coherent_state(kind: str, labels, p: ModelParams) -> gauss.GaussPolyState:
    """``kind="uv"``: labels (u, v); ``kind="w"``: labels (w+, w-) or a single w (Hermitian)."""
    if kind == "uv":
        u, v = labels
        return gauss.uv_coherent_state(u, v, p)
    if kind == "w":
        if np.ndim(labels) == 0:
            return w_coherent_state(complex(labels), None, p)
        wp, wm = labels
        return w_coherent_state(wp, wm, p)
    raise ValueError("kind must be 'uv' or 'w'")


# --- Heisenberg picture and Wick contractions --------------------------------

def to_ladder_coordinates(op: DiffOp, p: ModelParams) -> tuple[np.ndarray, complex]:
    """Coefficients over (a+, a-, abar+, abar-) and the constant part."""
    vec = op.linear_vector()
    coords = vec @ np.linalg.inv(ladder_operators(p).vectors)
    return coords, complex(op.constant())


def from_ladder_coordinates(coords, const, p: ModelParams) -> DiffOp:
    vec = np.asarray(coords) @ ladder_operators(p).vectors
    return DiffOp.linear(vec, const)


def heisenberg_evolve(op: DiffOp, t: float, p: ModelParams) -> DiffOp:
    """op_H(t) = exp(-tL) op exp(tL), so Tr[op_H(t) rho] = Tr[op rho(t)]."""
    ls = ladder_operators(p)
    coords, const = to_ladder_coordinates(op, p)
    mus = np.array([ls.shifts[k] for k in LADDER_NAMES])
    return from_ladder_coordinates(coords * np.exp(-mus * t), const, p)


def heisenberg_factors(p: ModelParams) -> dict[str, str]:
    """Which lambda multiplies t in the exponent of each evolved ladder operator."""
    ls = ladder_operators(p)
    return {k: _match_label(ls.spec, -ls.shifts[k]) for k in LADDER_NAMES}


def wick_expectation(factors, p: ModelParams) -> complex:
    """Tr[F1 F2 ... Fn rho_0] for linear F_k (DiffOps or (coords, const) pairs)."""
    fs = []
    for f in factors:
        fs.append(to_ladder_coordinates(f, p) if isinstance(f, DiffOp) else
                  (np.asarray(f[0], complex), complex(f[1])))

    def rec(items) -> complex:
        if not items:
            return 1.0 + 0j
        (u, k), rest = items[0], items[1:]
        total = k * rec(rest) if k != 0 else 0j
        for j, (v, _) in enumerate(rest):
            contr = u[0] * v[2] + u[1] * v[3]
            if contr != 0:
                total += contr * rec(rest[:j] + rest[j + 1:])
        return total

    return rec(fs)


def asymptotic_energy(p: ModelParams) -> float:
    return p.dsum / (2 * p.nu) + p.d2 * p.nu / 4 - p.beta / 2


def coherent_first_moments(w: complex, t, p: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """<x(t)>, <p(t)> in the Hermitian w-state, from the ladder decomposition."""
    t = np.asarray(t, float)
    ls = ladder_operators(p)
    TXA = basis_transform("X", "A", p).T
    w_vec = np.array([w, np.conj(w)])
    # a_H(t) = exp(-mu t) a and a rho_w = w rho_w
    decay = np.exp(-np.outer(t, [ls.shifts["a+"], ls.shifts["a-"]]))
    x = (decay * (TXA[0, :2] * w_vec)).sum(axis=1)
    pm = (decay * (TXA[3, :2] * w_vec)).sum(axis=1)
    return x.reshape(t.shape), pm.reshape(t.shape)


def printed_coherent_moments(w: complex, t, p: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """The reference closed forms for <x(t)>, <p(t)> (literal transcription)."""
    t = np.asarray(t, float)
    sp = spectrum(p.nu)
    wbar = math.sqrt(abs(1 - p.nu**2 / 4))
    om = sp.omega.real
    pw, pz = np.angle(w), np.angle(sp.z)
    env = np.exp(-p.nu * t / 2)
    x = -abs(w) / (2 * abs(sp.z) * wbar) * env * np.sin(om * t + pw - pz)
    pm = 2 * abs(w) * abs(sp.z) * env * np.cos(om * t - pw - pz)
    return x, pm


def printed_static_moments(w: complex, p: ModelParams) -> tuple[complex, complex]:
    sp = spectrum(p.nu)
    return -np.imag(w / (2 * sp.z * sp.omega)), 2 * np.real(w * sp.z)


# --- coherent-state bookkeeping ----------------------------------------------

def t_uw(p: ModelParams) -> np.ndarray:
    """U = T_UW W relating the (u, v) and (w+, w-) coherent-state labels."""
    TAB = basis_transform("A", "B", p).T
    return np.array([[TAB[2, 2], TAB[3, 2]], [TAB[2, 3], TAB[3, 3]]])


def printed_completeness_weight(p: ModelParams) -> complex:
    sp = spectrum(p.nu)
    K = p.dsum**2 - p.dsum * 2 * p.beta * p.nu + p.d0 * p.d2 * p.nu**2
    if K < 0:
        raise ValueError(f"radicand {K:.6g} is negative")
    val = sp.lam(-1, -1) * (p.d0 + p.d2 * (1 + p.nu * sp.lam(-1, 1))) / math.sqrt(K)
    return 2 * abs(sp.z) ** 2 * p.nu / p.dsum * np.imag(val)


def completeness_weight(p: ModelParams) -> float:
    """|det T_UW|^2 / <<rho_0|rho_0>>: Jacobian of (u, v) -> (w+, w-) over the b-basis norm.

    Its magnitude agrees with the reference weight for nu < 2; the reference
    expression carries the opposite sign.
    """
    r = gauss.relaxed_parameters(p)
    norm = math.sqrt(r.Q2 / r.R2) / 2
    return float(abs(np.linalg.det(t_uw(p))) ** 2 / norm)


def uv_label_factor(w_plus: complex, w_minus: complex, p: ModelParams) -> complex:
    """c(W) with rho_{T_UW W} = c(W) rho_W; equal to Tr rho_{T_UW W}."""
    u, v = t_uw(p) @ np.array([w_plus, w_minus])
    return gauss.trace(gauss.uv_coherent_state(u, v, p))


# --- weak coupling ---------------------------------------------------------------

def weak_coupling_limit_distance(p: ModelParams) -> dict[str, float]:
    """Distance of abar+- from +-i(cbar+- - c-+) over X."""
    ops = ladder_operators(p).ops
    c = closed_ladder_ops()
    out = {}
    for tag, other, s in (("+", "-", 1), ("-", "+", -1)):
        target = (s * 1j * (c["cbar" + tag] - c["c" + other])).linear_vector()
        out["abar" + tag] = float(np.max(np.abs(ops["abar" + tag].linear_vector() - target)))
    return out


def resolved_report(p: ModelParams) -> dict:
    ls = ladder_operators(p)
    diag = diagonal_form_check(p)
    return {"params": p.to_dict(), "spectrum": ls.spec.to_dict(),
            "pairing": ls.pairing_record(),
            "heisenberg_exponents": heisenberg_factors(p),
            "generator": diag.to_dict()}
