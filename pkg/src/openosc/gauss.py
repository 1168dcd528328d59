"""Gaussian-times-polynomial density matrices rho(x, x_d).

    rho(x, x_d) = P(x, x_d) * exp(-1/2 X^T M X + v.X + c),   X = (x, x_d)

The class is closed under the action of any :class:`~openosc.diffop.DiffOp`
and of Weyl operators (exponentials of first-order operators). Traces and
scalar products are evaluated exactly with complex Gaussian moment
recursions; quadrature only appears in :func:`positivity_check`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diffop import DEGREE_CAP, DiffOp
from .moments import observable
from .params import ModelParams, relaxed_r2, require_valid

STATE_FORMAT = "openosc.gausspoly/1"


def _trim(P: np.ndarray) -> np.ndarray:
    """Drop trailing all-zero rows/columns of a coefficient array."""
    nz = np.argwhere(P != 0)
    if nz.size == 0:
        return np.zeros((1, 1), complex)
    j, k = nz.max(axis=0)
    return P[: j + 1, : k + 1]


def _pad(P: np.ndarray, shape) -> np.ndarray:
    out = np.zeros(shape, complex)
    out[: P.shape[0], : P.shape[1]] = P
    return out


def _poly_mul(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    out = np.zeros((A.shape[0] + B.shape[0] - 1, A.shape[1] + B.shape[1] - 1), complex)
    for (j, k), a in np.ndenumerate(A):
        if a != 0:
            out[j: j + B.shape[0], k: k + B.shape[1]] += a * B
    return out


def _poly_shift(P: np.ndarray, s) -> np.ndarray:
    """Coefficients of P(x + s0, x_d + s1)."""
    J, K = P.shape
    bx = np.array([[math.comb(j, i) * s[0] ** (j - i) if i <= j else 0
                    for j in range(J)] for i in range(J)], complex)
    bd = np.array([[math.comb(k, i) * s[1] ** (k - i) if i <= k else 0
                    for k in range(K)] for i in range(K)], complex)
    return bx @ P @ bd.T


def _poly_eval(P: np.ndarray, x, xd):
    x = np.asarray(x, complex)
    xd = np.asarray(xd, complex)
    out = np.zeros(np.broadcast(x, xd).shape, complex)
    for j in range(P.shape[0] - 1, -1, -1):
        row = np.zeros_like(out)
        for k in range(P.shape[1] - 1, -1, -1):
            row = row * xd + P[j, k]
        out = out * x + row
    return out


def gaussian_moments_1d(mu: complex, var: complex, n: int) -> np.ndarray:
    """E[Y^k], k = 0..n, for a (complex-continued) normal law."""
    m = np.zeros(n + 1, complex)
    m[0] = 1
    if n >= 1:
        m[1] = mu
    for k in range(2, n + 1):
        m[k] = mu * m[k - 1] + (k - 1) * var * m[k - 2]
    return m


def gaussian_moments_2d(mu, cov, nj: int, nk: int) -> np.ndarray:
    """E[Y0^j Y1^k] table by Stein's identity."""
    E = np.zeros((nj + 1, nk + 1), complex)
    E[0, :] = gaussian_moments_1d(mu[1], cov[1, 1], nk)
    for j in range(nj):
        for k in range(nk + 1):
            val = mu[0] * E[j, k]
            if j:
                val += j * cov[0, 0] * E[j - 1, k]
            if k:
                val += k * cov[0, 1] * E[j, k - 1]
            E[j + 1, k] = val
    return E


@dataclass(frozen=True)
class GaussPolyState:
    M: np.ndarray
    v: np.ndarray = field(default_factory=lambda: np.zeros(2, complex))
    c: complex = 0j
    P: np.ndarray = field(default_factory=lambda: np.ones((1, 1), complex))

    def __post_init__(self):
        M = np.asarray(self.M, complex)
        if M.shape != (2, 2) or M[0, 1] != M[1, 0]:
            raise ValueError("M must be a symmetric 2x2 matrix")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "v", np.asarray(self.v, complex).reshape(2))
        object.__setattr__(self, "c", complex(self.c))
        object.__setattr__(self, "P", _trim(np.atleast_2d(np.asarray(self.P, complex))))

    # --- basic properties --------------------------------------------
    @property
    def poly_degree(self) -> int:
        nz = np.argwhere(self.P != 0)
        return int(nz.sum(axis=1).max()) if nz.size else 0

    def integrable(self) -> bool:
        return bool(np.all(np.linalg.eigvalsh(self.M.real) > 0))

    def __call__(self, x, xd):
        x = np.asarray(x, float)
        xd = np.asarray(xd, float)
        M, v = self.M, self.v
        E = (-0.5 * (M[0, 0] * x * x + 2 * M[0, 1] * x * xd + M[1, 1] * xd * xd)
             + v[0] * x + v[1] * xd + self.c)
        return _poly_eval(self.P, x, xd) * np.exp(E)

    def scale(self, a: complex) -> "GaussPolyState":
        return GaussPolyState(self.M, self.v, self.c, self.P * a)

    def with_log_shift(self, dc: complex) -> "GaussPolyState":
        return GaussPolyState(self.M, self.v, self.c + dc, self.P)

    def multiply_gaussian(self, M2=None, v2=(0, 0), c2=0) -> "GaussPolyState":
        """Multiply by exp(-1/2 X^T M2 X + v2.X + c2)."""
        M2 = np.zeros((2, 2)) if M2 is None else np.asarray(M2)
        return GaussPolyState(self.M + M2, self.v + np.asarray(v2), self.c + c2, self.P)

    def dagger(self) -> "GaussPolyState":
        """Kernel of the adjoint operator: rho*(x, -x_d)."""
        flip = np.array([1, -1])
        M = np.conj(self.M) * np.outer(flip, flip)
        P = np.conj(self.P) * ((-1.0) ** np.arange(self.P.shape[1]))[None, :]
        return GaussPolyState(M, np.conj(self.v) * flip, np.conj(self.c), P)

    def is_close(self, other: "GaussPolyState", tol: float = 1e-10) -> bool:
        """Compare pointwise on a probe set (representations are not unique)."""
        xs = np.linspace(-2.0, 2.0, 7)
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        a, b = self(X, Y), other(X, Y)
        return bool(np.max(np.abs(a - b)) <= tol * max(1.0, np.max(np.abs(a))))

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        return self.is_close(self.dagger(), tol)

    # --- serialization ------------------------------------------------
    def to_dict(self) -> dict:
        cx = lambda a: [[float(np.real(z)), float(np.imag(z))] for z in np.ravel(a)]
        return {"format": STATE_FORMAT, "M": cx(self.M), "v": cx(self.v),
                "c": cx([self.c])[0], "P_shape": list(self.P.shape), "P": cx(self.P)}

    @classmethod
    def from_dict(cls, d: dict) -> "GaussPolyState":
        if d.get("format") != STATE_FORMAT:
            raise ValueError(f"unsupported state format {d.get('format')!r}")
        un = lambda a: np.array([complex(r, i) for r, i in a])
        return cls(un(d["M"]).reshape(2, 2), un(d["v"]), complex(*d["c"]),
                   un(d["P"]).reshape(d["P_shape"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "GaussPolyState":
        return cls.from_dict(json.loads(Path(path).read_text()))


# --- DiffOp action ----------------------------------------------------------

def _d_dx(P: np.ndarray, M, v, axis: int) -> np.ndarray:
    """Polynomial part of d/dX_axis (P e^E) divided by e^E."""
    J, K = P.shape
    out = np.zeros((J + 1, K + 1), complex)
    if axis == 0:
        out[: J - 1, :K] += P[1:, :] * np.arange(1, J)[:, None]
    else:
        out[:J, : K - 1] += P[:, 1:] * np.arange(1, K)[None, :]
    # dE/dX_axis = -M[axis,0] x - M[axis,1] x_d + v[axis]
    out[1: J + 1, :K] += -M[axis, 0] * P
    out[:J, 1: K + 1] += -M[axis, 1] * P
    out[:J, :K] += v[axis] * P
    return _trim(out)


def apply(op: DiffOp, s: GaussPolyState, degree_cap: int = DEGREE_CAP) -> GaussPolyState:
    """Exact action of a normally ordered operator on a state."""
    cache: dict[tuple[int, int], np.ndarray] = {(0, 0): s.P}

    def deriv(c: int, e: int) -> np.ndarray:
        if (c, e) not in cache:
            if e:
                cache[(c, e)] = _d_dx(deriv(c, e - 1), s.M, s.v, 1)
            else:
                cache[(c, e)] = _d_dx(deriv(c - 1, e), s.M, s.v, 0)
        return cache[(c, e)]

    total = np.zeros((1, 1), complex)
    for (a, b, c, e), coef in op.items():
        Q = deriv(c, e)
        shifted = np.zeros((Q.shape[0] + a, Q.shape[1] + b), complex)
        shifted[a:, b:] = Q * complex(coef)
        shape = np.maximum(total.shape, shifted.shape)
        total = _pad(total, shape) + _pad(shifted, shape)
    out = GaussPolyState(s.M, s.v, s.c, total)
    if out.poly_degree > degree_cap:
        raise OverflowError(f"polynomial degree {out.poly_degree} exceeds cap {degree_cap}")
    return out


def zero_like(s: GaussPolyState) -> GaussPolyState:
    return GaussPolyState(s.M, s.v, s.c, np.zeros((1, 1)))


def add(a: GaussPolyState, b: GaussPolyState) -> GaussPolyState:
    """Sum of two states sharing the same Gaussian factor."""
    if not (np.allclose(a.M, b.M, rtol=0, atol=1e-14) and np.allclose(a.v, b.v, rtol=0, atol=1e-14)):
        raise ValueError("states have different Gaussian factors")
    shape = np.maximum(a.P.shape, b.P.shape)
    return GaussPolyState(a.M, a.v, a.c, _pad(a.P, shape) + _pad(b.P, shape) * np.exp(b.c - a.c))


def max_coefficient(s: GaussPolyState) -> float:
    return float(np.max(np.abs(s.P)) * abs(np.exp(s.c)))


def coefficient_residual(a: GaussPolyState, b: GaussPolyState) -> float:
    """Largest polynomial-coefficient difference of two states with one Gaussian factor."""
    return max_coefficient(add(a, b.scale(-1)))


# --- Weyl operators ---------------------------------------------------------

@dataclass(frozen=True)
class WeylOp:
    """rho(X) -> exp(phi + m.X) rho(X + s), the exponential of a first-order operator."""

    s: np.ndarray
    m: np.ndarray
    phi: complex = 0j

    @classmethod
    def identity(cls) -> "WeylOp":
        return cls(np.zeros(2, complex), np.zeros(2, complex), 0j)

    @classmethod
    def exp_of(cls, op: DiffOp) -> "WeylOp":
        """exp(op) for op = s.grad + m.X + k; exact since [s.grad, m.X] = s.m."""
        for mono in dict(op.items()):
            if sum(mono) > 1:
                raise ValueError("Weyl operators need a first-order operator")
        s = np.array([complex(op[(0, 0, 1, 0)]), complex(op[(0, 0, 0, 1)])])
        m = np.array([complex(op[(1, 0, 0, 0)]), complex(op[(0, 1, 0, 0)])])
        return cls(s, m, complex(op.constant()) + 0.5 * s @ m)

    def __matmul__(self, other: "WeylOp") -> "WeylOp":
        """Composition (self after other)."""
        return WeylOp(self.s + other.s, self.m + other.m, self.phi + other.phi + other.m @ self.s)

    def __call__(self, st: GaussPolyState) -> GaussPolyState:
        s = self.s
        M, v = st.M, st.v
        return GaussPolyState(M, v - M @ s + self.m,
                              st.c - 0.5 * s @ M @ s + v @ s + self.phi,
                              _poly_shift(st.P, s))


# --- exact integrals ----------------------------------------------------------

def trace(s: GaussPolyState) -> complex:
    """Tr rho = integral of rho(x, 0) dx."""
    a = s.M[0, 0]
    if a.real <= 0:
        raise ValueError("state is not integrable along the diagonal")
    b = s.v[0]
    mom = gaussian_moments_1d(b / a, 1 / a, s.P.shape[0] - 1)
    pref = np.sqrt(2 * np.pi / a) * np.exp(b * b / (2 * a) + s.c)
    return complex(pref * (s.P[:, 0] @ mom))


def integrate(s: GaussPolyState) -> complex:
    """Integral of rho over the whole (x, x_d) plane."""
    if not s.integrable():
        raise ValueError("Re M is not positive definite")
    cov = np.linalg.inv(s.M)
    mu = cov @ s.v
    sqrt_det = np.prod(np.sqrt(np.linalg.eigvals(s.M)))
    pref = 2 * np.pi / sqrt_det * np.exp(0.5 * s.v @ mu + s.c)
    E = gaussian_moments_2d(mu, cov, s.P.shape[0] - 1, s.P.shape[1] - 1)
    return complex(pref * np.sum(s.P * E))


def overlap(a: GaussPolyState, b: GaussPolyState) -> complex:
    """<<a|b>> = Tr[a^dagger b] = integral of a* b."""
    prod = GaussPolyState(np.conj(a.M) + b.M, np.conj(a.v) + b.v, np.conj(a.c) + b.c,
                          _poly_mul(np.conj(a.P), b.P))
    return integrate(prod)


def expectation(obs, s: GaussPolyState, convention: str = "left-mult") -> complex:
    """Tr[O rho] for a word in x, p (e.g. ``"pp"``) or a ``{word: coef}`` map."""
    if isinstance(obs, DiffOp):
        op = obs
    elif isinstance(obs, str):
        op = observable(obs, convention)
    else:
        op = DiffOp()
        for word, coef in obs.items():
            op = op + coef * observable(word, convention)
    return trace(apply(op, s))


# --- the relaxed state and its excitations --------------------------------

@dataclass(frozen=True)
class RelaxedParameters:
    Q2: float
    R2: float
    S2: float

    def to_dict(self) -> dict:
        return {"Q2": self.Q2, "R2": self.R2, "S2": self.S2}


def relaxed_parameters(p: ModelParams) -> RelaxedParameters:
    """Exponent parameters of the stationary Gaussian (L rho_0 = 0)."""
    return RelaxedParameters(Q2=2 * p.nu / p.dsum, R2=relaxed_r2(p), S2=p.d2 * p.nu / p.dsum)


def printed_relaxed_parameters(p: ModelParams) -> RelaxedParameters:
    """The reference closed form, which is stationary only when d2 = 0."""
    return RelaxedParameters(Q2=2 * p.nu / p.dsum,
                             R2=p.dsum / (2 * p.nu) + 2 * p.d0 * p.d2 * p.nu / p.dsum - p.beta,
                             S2=2 * p.d2 * p.nu / p.dsum)


def gaussian_state(Q2: float, R2: float, S2: float) -> GaussPolyState:
    """Q/sqrt(2 pi) exp(-Q^2 x^2/2 - R^2 x_d^2/2 - i S^2 x x_d)."""
    if Q2 <= 0 or R2 <= 0:
        raise ValueError("Q^2 and R^2 must be positive")
    M = np.array([[Q2, 1j * S2], [1j * S2, R2]])
    return GaussPolyState(M, np.zeros(2), math.log(math.sqrt(Q2) / math.sqrt(2 * math.pi)))


def relaxed_state(p: ModelParams) -> GaussPolyState:
    require_valid(p)
    r = relaxed_parameters(p)
    return gaussian_state(r.Q2, r.R2, r.S2)


def b_operators(p: ModelParams) -> dict[str, DiffOp]:
    """Annihilators b, b_d of the relaxed state and their adjoints."""
    r = relaxed_parameters(p)
    Q, R, S2 = math.sqrt(r.Q2), math.sqrt(r.R2), r.S2
    s = 1 / math.sqrt(2)
    x, xd, P, Pd = DiffOp.x(), DiffOp.xd(), DiffOp.p(), DiffOp.p_d()
    return {
        "b": (Q * x + (1j / Q) * (P + S2 * xd)) * s,
        "b_d": (R * xd + (1j / R) * (Pd + S2 * x)) * (1j * s),
        "bbar": (Q * x - (1j / Q) * (P + S2 * xd)) * s,
        "bbar_d": (R * xd - (1j / R) * (Pd + S2 * x)) * (-1j * s),
    }


def b_basis_state(m: int, n: int, p: ModelParams) -> GaussPolyState:
    ops = b_operators(p)
    st = relaxed_state(p)
    for _ in range(m):
        st = apply(ops["bbar"], st)
    for _ in range(n):
        st = apply(ops["bbar_d"], st)
    return st.scale(1 / math.sqrt(math.factorial(m) * math.factorial(n)))


def uv_coherent_state(u: complex, v: complex, p: ModelParams) -> GaussPolyState:
    """exp(u bbar + v bbar_d) rho_0."""
    ops = b_operators(p)
    return WeylOp.exp_of(u * ops["bbar"] + v * ops["bbar_d"])(relaxed_state(p))


# --- positivity -----------------------------------------------------------------

def default_positivity_halfwidth(s: GaussPolyState) -> float:
    Q = math.sqrt(abs(s.M[0, 0].real))
    R = math.sqrt(abs(s.M[1, 1].real))
    return 8 * max(1 / Q, 1 / R)


def kernel_matrix(s: GaussPolyState, N: int = 128, L: float | None = None):
    """Quadrature-weighted kernel rho(x_+, x_-) on an N x N grid in (x_+, x_-)."""
    L = default_positivity_halfwidth(s) if L is None else L
    xs = np.linspace(-L, L, N)
    h = xs[1] - xs[0]
    Xp, Xm = np.meshgrid(xs, xs, indexing="ij")
    return s((Xp + Xm) / 2, Xp - Xm) * h, xs


def positivity_check(s: GaussPolyState, N: int = 128, L: float | None = None,
                     tol: float = 1e-8) -> float:
    """Smallest eigenvalue of the discretized kernel of a Hermitian state."""
    K, _ = kernel_matrix(s, N, L)
    scale = max(1.0, float(np.max(np.abs(K))))
    if np.max(np.abs(K - K.conj().T)) > tol * scale:
        raise ValueError("state is not Hermitian")
    return float(np.linalg.eigvalsh(0.5 * (K + K.conj().T))[0])
