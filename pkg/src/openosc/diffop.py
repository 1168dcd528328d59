"""Normally ordered polynomial differential operators on rho(x, x_d).

A :class:`DiffOp` is a finite sum of monomials ``x^a x_d^b grad^c grad_d^e``
(multiplications always to the left of derivatives). Products are brought
back to normal order with the canonical commutators ``[grad, x] = 1`` and
``[grad_d, x_d] = 1``.

Coefficients may be Python complex numbers or exact numbers (``Fraction``,
sympy numbers); the algebra only uses ``+``, ``*`` and ``== 0``.
"""

from __future__ import annotations

import math
from typing import Iterable, Mapping

import numpy as np
import sympy as sp

from .params import ModelParams

Monomial = tuple[int, int, int, int]

#: maximal total degree of any monomial
DEGREE_CAP = 32

#: ordering of the canonical basis X used for coefficient vectors
X_BASIS = ("x", "p", "x_d", "p_d")


class DegreeOverflow(ArithmeticError):
    pass


def _is_zero(c) -> bool:
    return c == 0


class DiffOp:
    """Immutable normally ordered operator in (x, x_d, grad, grad_d)."""

    __slots__ = ("_terms", "degree_cap")
    # make numpy scalars defer to __rmul__ instead of broadcasting
    __array_ufunc__ = None

    def __init__(self, terms: Mapping[Monomial, object] | None = None,
                 degree_cap: int = DEGREE_CAP):
        self.degree_cap = degree_cap
        clean = {}
        for mono, c in (terms or {}).items():
            if len(mono) != 4 or min(mono) < 0:
                raise ValueError(f"bad monomial {mono}")
            if sum(mono) > degree_cap:
                raise DegreeOverflow(f"monomial {mono} exceeds degree cap {degree_cap}")
            if not _is_zero(c):
                clean[tuple(int(k) for k in mono)] = c
        self._terms = clean

    # --- constructors -------------------------------------------------
    @classmethod
    def scalar(cls, c) -> "DiffOp":
        return cls({(0, 0, 0, 0): c})

    @classmethod
    def x(cls) -> "DiffOp":
        return cls({(1, 0, 0, 0): 1})

    @classmethod
    def xd(cls) -> "DiffOp":
        return cls({(0, 1, 0, 0): 1})

    @classmethod
    def grad(cls) -> "DiffOp":
        return cls({(0, 0, 1, 0): 1})

    @classmethod
    def grad_d(cls) -> "DiffOp":
        return cls({(0, 0, 0, 1): 1})

    @classmethod
    def p(cls) -> "DiffOp":
        """p = -i grad."""
        return cls({(0, 0, 1, 0): -1j})

    @classmethod
    def p_d(cls) -> "DiffOp":
        """p_d = -i grad_d."""
        return cls({(0, 0, 0, 1): -1j})

    @classmethod
    def linear(cls, coeffs: Iterable, const=0) -> "DiffOp":
        """Operator c_x x + c_p p + c_xd x_d + c_pd p_d + const."""
        cx, cp, cxd, cpd = coeffs
        return cls({(1, 0, 0, 0): cx, (0, 0, 1, 0): -1j * cp,
                    (0, 1, 0, 0): cxd, (0, 0, 0, 1): -1j * cpd,
                    (0, 0, 0, 0): const})

    # --- container protocol ------------------------------------------
    @property
    def terms(self) -> dict[Monomial, object]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._terms)

    def __getitem__(self, mono: Monomial):
        return self._terms.get(tuple(mono), 0)

    @property
    def degree(self) -> int:
        return max((sum(m) for m in self._terms), default=0)

    def is_zero(self) -> bool:
        return not self._terms

    # --- arithmetic ---------------------------------------------------
    def _coerce(self, other) -> "DiffOp":
        return other if isinstance(other, DiffOp) else DiffOp.scalar(other)

    def __add__(self, other) -> "DiffOp":
        other = self._coerce(other)
        out = dict(self._terms)
        for m, c in other._terms.items():
            out[m] = out.get(m, 0) + c
        return DiffOp(out, self.degree_cap)

    __radd__ = __add__

    def __neg__(self) -> "DiffOp":
        return DiffOp({m: -c for m, c in self._terms.items()}, self.degree_cap)

    def __sub__(self, other) -> "DiffOp":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "DiffOp":
        return self._coerce(other) - self

    def __mul__(self, other) -> "DiffOp":
        if not isinstance(other, DiffOp):
            return DiffOp({m: c * other for m, c in self._terms.items()}, self.degree_cap)
        return normal_order_product(self, other)

    def __rmul__(self, other) -> "DiffOp":
        return DiffOp({m: other * c for m, c in self._terms.items()}, self.degree_cap)

    def __truediv__(self, other) -> "DiffOp":
        return DiffOp({m: c / other for m, c in self._terms.items()}, self.degree_cap)

    def __pow__(self, n: int) -> "DiffOp":
        out = DiffOp.scalar(1)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiffOp):
            other = DiffOp.scalar(other)
        return (self - other).is_zero()

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    def map(self, fn) -> "DiffOp":
        return DiffOp({m: fn(c) for m, c in self._terms.items()}, self.degree_cap)

    def conj(self) -> "DiffOp":
        """Complex-conjugate the coefficients (not the operator adjoint)."""
        return self.map(lambda c: complex(c).conjugate())

    def numeric(self) -> "DiffOp":
        return self.map(complex)

    # --- comparison ---------------------------------------------------
    def max_abs(self) -> float:
        return max((abs(complex(c)) for c in self._terms.values()), default=0.0)

    def is_close(self, other, tol: float = 1e-12) -> bool:
        return (self - self._coerce(other)).max_abs() <= tol

    # --- linear operators --------------------------------------------
    def is_linear(self) -> bool:
        return all(sum(m) <= 1 for m in self._terms)

    def linear_vector(self) -> np.ndarray:
        """Coefficients over X = (x, p, x_d, p_d); constant part dropped."""
        if not self.is_linear():
            raise ValueError("operator is not linear in the canonical variables")
        return np.array([complex(self[(1, 0, 0, 0)]), 1j * complex(self[(0, 0, 1, 0)]),
                         complex(self[(0, 1, 0, 0)]), 1j * complex(self[(0, 0, 0, 1)])])

    def constant(self):
        return self[(0, 0, 0, 0)]

    # --- serialization ------------------------------------------------
    def to_text(self) -> str:
        lines = []
        for m in sorted(self._terms):
            c = complex(self._terms[m])
            lines.append(f"({m[0]},{m[1]},{m[2]},{m[3]}): {c.real:+.17g}{c.imag:+.17g}i")
        return "\n".join(lines)

    @classmethod
    def from_text(cls, text: str) -> "DiffOp":
        terms = {}
        for line in text.strip().splitlines():
            mono, val = line.split(":")
            mono = tuple(int(k) for k in mono.strip()[1:-1].split(","))
            terms[mono] = complex(val.strip().replace("i", "j"))
        return cls(terms)

    def __repr__(self) -> str:
        if not self._terms:
            return "DiffOp(0)"
        parts = []
        names = ("x", "xd", "D", "Dd")
        for m in sorted(self._terms):
            mon = "*".join(f"{n}^{k}" if k > 1 else n for n, k in zip(names, m) if k)
            parts.append(f"({self._terms[m]})" + (f"*{mon}" if mon else ""))
        return "DiffOp(" + " + ".join(parts) + ")"


def _reorder(c: int, a: int):
    """grad^c x^a = sum_k coef_k x^(a-k) grad^(c-k)."""
    for k in range(min(c, a) + 1):
        yield k, math.comb(c, k) * math.perm(a, k)


def normal_order_product(A: DiffOp, B: DiffOp) -> DiffOp:
    cap = min(A.degree_cap, B.degree_cap)
    out: dict[Monomial, object] = {}
    for (a1, b1, c1, e1), ca in A.items():
        for (a2, b2, c2, e2), cb in B.items():
            cab = ca * cb
            for k, wk in _reorder(c1, a2):
                for l, wl in _reorder(e1, b2):
                    m = (a1 + a2 - k, b1 + b2 - l, c1 - k + c2, e1 - l + e2)
                    if sum(m) > cap:
                        raise DegreeOverflow(f"product degree {sum(m)} exceeds cap {cap}")
                    out[m] = out.get(m, 0) + cab * (wk * wl)
    return DiffOp(out, cap)


def commutator(A: DiffOp, B: DiffOp) -> DiffOp:
    return A * B - B * A


def build_generator(p: ModelParams, exact: bool = False) -> DiffOp:
    """Generator L of d rho/dt = L rho.

    ``exact=True`` builds sympy-rational coefficients from the (rational)
    parameter values, for identity checks free of roundoff.
    """
    if exact:
        I = sp.I
        nu, d0, d2, beta = (sp.nsimplify(v, rational=True) for v in (p.nu, p.d0, p.d2, p.beta))
    else:
        I = 1j
        nu, d0, d2, beta = p.nu, p.d0, p.d2, p.beta
    return DiffOp({
        (0, 0, 1, 1): I,
        (1, 1, 0, 0): -I,
        (0, 2, 0, 0): -(d0 + d2 * nu**2 - 2 * nu * beta) / 2,
        (0, 1, 1, 0): (d2 * nu - beta) * I,
        (0, 1, 0, 1): -nu,
        (0, 0, 2, 0): d2 / 2,
    })


def left_x() -> DiffOp:
    """x_+ = x + x_d/2: left multiplication by the position operator."""
    return DiffOp({(1, 0, 0, 0): 1, (0, 1, 0, 0): 0.5})


def left_p() -> DiffOp:
    """p_+ = p/2 + p_d: left multiplication by the momentum operator."""
    return DiffOp({(0, 0, 1, 0): -0.5j, (0, 0, 0, 1): -1j})


def right_x() -> DiffOp:
    return DiffOp({(1, 0, 0, 0): 1, (0, 1, 0, 0): -0.5})


def right_p() -> DiffOp:
    """p_- = -p/2 + p_d: right multiplication by the momentum operator."""
    return DiffOp({(0, 0, 1, 0): 0.5j, (0, 0, 0, 1): -1j})


def closed_ladder_ops() -> dict[str, DiffOp]:
    """c_+-, cbar_+- of the closed oscillator, with grad_+- = grad/2 +- grad_d."""
    s = 1 / math.sqrt(2)
    xp = left_x()
    xm = right_x()
    gp = DiffOp({(0, 0, 1, 0): 0.5, (0, 0, 0, 1): 1})
    gm = DiffOp({(0, 0, 1, 0): 0.5, (0, 0, 0, 1): -1})
    return {"c+": (xp + gp) * s, "c-": (xm + gm) * s,
            "cbar+": (xp - gp) * s, "cbar-": (xm - gm) * s}
