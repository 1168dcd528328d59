"""Moment equations and classical equations of motion generated by L.

Expectation values are linear functionals of rho: ``Tr[O rho] =
<<Tr| O |rho>>`` with ``<<Tr|x, x_d>> = delta(x_d)``. Any normally ordered
functional ``<<Tr| x^a x_d^b grad^c grad_d^e`` reduces, by integration by
parts in x, to the moments ``m[a, e] = <<Tr| x^a p_d^e |rho>>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import sympy as sp

from .diffop import DiffOp, build_generator, left_p, left_x
from .params import ModelParams, omega_nu

CONVENTIONS = ("left-mult", "pd-simplified")


class MomentSystemError(RuntimeError):
    """The reduced moment equations do not close into the expected form."""


def trace_functional(op: DiffOp) -> dict[tuple[int, int], complex]:
    """Reduce ``<<Tr| op`` to coefficients of the moments ``m[a, e]``."""
    out: dict[tuple[int, int], complex] = {}
    for (a, b, c, e), coef in op.items():
        if b or c > a:
            continue
        w = complex(coef) * (-1) ** c * math.perm(a, c) * 1j**e
        key = (a - c, e)
        out[key] = out.get(key, 0) + w
    return {k: v for k, v in out.items() if v != 0}


def observable(word: str, convention: str = "left-mult") -> DiffOp:
    """Liouville-space operator for a product of x and p (leftmost first)."""
    if convention == "left-mult":
        gens = {"x": left_x(), "p": left_p()}
    elif convention == "pd-simplified":
        gens = {"x": DiffOp.x(), "p": DiffOp.p_d()}
    else:
        raise ValueError(f"unknown convention {convention!r}")
    op = DiffOp.scalar(1)
    for ch in word.replace(" ", ""):
        op = op * gens[ch]
    return op


@dataclass
class MomentSystem:
    """d<(x,p)>/dt = A <(x,p)>;  dSigma/dt = A Sigma + Sigma A^T + D."""

    A: np.ndarray
    D: np.ndarray
    convention: str

    def stationary_covariance(self) -> np.ndarray:
        return scipy.linalg.solve_continuous_lyapunov(self.A, -self.D)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.A)

    def first_moments(self, m0: np.ndarray, t: float) -> np.ndarray:
        return scipy.linalg.expm(self.A * t) @ np.asarray(m0)

    def covariance(self, sigma0: np.ndarray, t: float) -> np.ndarray:
        """Second-moment matrix at time t from sigma0 at time 0."""
        sinf = self.stationary_covariance()
        E = scipy.linalg.expm(self.A * t)
        return sinf + E @ (np.asarray(sigma0) - sinf) @ E.T


_OBS = ("x", "p", "xx", "pp", "xp")


def _obs_op(name: str, convention: str) -> DiffOp:
    if name == "xp":
        return (observable("xp", convention) + observable("px", convention)) * 0.5
    return observable(name, convention)


def derive_moment_system(p: ModelParams, convention: str = "left-mult",
                         tol: float = 1e-12) -> MomentSystem:
    L = build_generator(p)
    keys = [(0, 0), (1, 0), (0, 1), (2, 0), (0, 2), (1, 1)]
    idx = {k: i for i, k in enumerate(keys)}

    def vec(fun: dict) -> np.ndarray:
        v = np.zeros(len(keys), complex)
        for k, c in fun.items():
            if k not in idx:
                raise MomentSystemError(f"moment {k} outside the second-order closure")
            v[idx[k]] += c
        return v

    # rows: observables (1, x, p, xx, pp, xp) in terms of the m basis
    obs_rows = [vec({(0, 0): 1})] + [vec(trace_functional(_obs_op(o, convention))) for o in _OBS]
    der_rows = [vec(trace_functional(L))] + [
        vec(trace_functional(_obs_op(o, convention) * L)) for o in _OBS]
    T = np.array(obs_rows)
    # d/dt obs = G obs, with obs = T m  =>  G = Dr T^-1
    G = np.array(der_rows) @ np.linalg.inv(T)
    if np.max(np.abs(G.imag)) > tol * max(1.0, np.max(np.abs(G))):
        raise MomentSystemError("moment equations are not real")
    G = G.real
    if np.max(np.abs(G[0])) > tol:
        raise MomentSystemError("trace is not conserved")
    A = G[1:3, 1:3]
    if np.max(np.abs(G[1:3, 0])) > tol or np.max(np.abs(G[1:3, 3:])) > tol:
        raise MomentSystemError("first moments do not close")
    # second moments: (xx, pp, xp) block against (1, xx, pp, xp)
    S = G[3:, :]
    if np.max(np.abs(S[:, 1:3])) > tol:
        raise MomentSystemError("second moments couple to first moments")
    D = np.array([[S[0, 0], S[2, 0]], [S[2, 0], S[1, 0]]])
    # compare the linear part with Sigma -> A Sigma + Sigma A^T
    basis = [np.array([[1, 0], [0, 0]]), np.array([[0, 0], [0, 1]]),
             np.array([[0, 1], [1, 0]])]
    pick = [(0, 0), (1, 1), (0, 1)]
    for j, Bj in enumerate(basis):
        lyap = A @ Bj + Bj @ A.T
        got = [S[i, 3 + j] for i in range(3)]
        want = [lyap[q] for q in pick]
        if not np.allclose(got, want, atol=tol * 10, rtol=0):
            raise MomentSystemError("second-moment drift is not of Lyapunov form")
    return MomentSystem(A=A, D=D, convention=convention)


T = sp.Symbol("t", real=True)


def euler_lagrange_residuals(p: ModelParams):
    """Residual evaluators of the classical equations of the CTP Lagrangian.

    x'' = -x - nu x' + i (d0 x_d - d2 x_d'') and x_d'' = -x_d + nu x_d'.
    Both evaluators take sympy expressions in :data:`T` and a sequence of
    times, and return the largest absolute residual.
    """
    nu, d0, d2 = p.nu, p.d0, p.d2

    def _max(expr, times):
        f = sp.lambdify(T, expr, "numpy")
        vals = np.broadcast_to(np.asarray(f(np.asarray(times, float)), complex), np.shape(times))
        return float(np.max(np.abs(vals)))

    def residual_x(x_expr, xd_expr, times) -> float:
        r = (sp.diff(x_expr, T, 2) + x_expr + nu * sp.diff(x_expr, T)
             - sp.I * (d0 * xd_expr - d2 * sp.diff(xd_expr, T, 2)))
        return _max(r, times)

    def residual_xd(xd_expr, times) -> float:
        r = sp.diff(xd_expr, T, 2) + xd_expr - nu * sp.diff(xd_expr, T)
        return _max(r, times)

    return residual_x, residual_xd


def growing_fluctuation(p: ModelParams):
    """x_d(t) = exp(nu t/2) cos(omega_nu t): the time-reversed damped mode."""
    w = complex(omega_nu(p.nu))
    w = w.real if w.imag == 0 else w
    return sp.exp(p.nu * T / 2) * sp.cos(w * T)
