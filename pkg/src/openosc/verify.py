"""Randomized sweep of the exact algebraic identities."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import gauss, ladder
from .diffop import commutator
from .params import ModelParams, relaxed_r2

TOL = 1e-12


def random_params(rng: np.random.Generator) -> ModelParams:
    """nu in (0, 2) or (2, 4), d0, d2 in [0, 3], beta keeping the relaxed widths positive."""
    while True:
        nu = rng.uniform(0.05, 1.95) if rng.random() < 0.5 else rng.uniform(2.05, 3.95)
        d0, d2 = rng.uniform(0, 3, size=2)
        if d0 + d2 < 0.05:
            continue
        r2_free = relaxed_r2(ModelParams(nu, d0, d2))
        beta = rng.uniform(-0.5, 0.9 * r2_free)
        return ModelParams(float(nu), float(d0), float(d2), float(beta))


@dataclass
class DrawResult:
    params: ModelParams
    residuals: dict[str, float]
    scale: float

    @property
    def worst(self) -> float:
        return max(self.residuals.values())


@dataclass
class SweepReport:
    seed: int
    draws: list[DrawResult] = field(default_factory=list)
    tol: float = TOL

    def max_residuals(self) -> dict[str, float]:
        keys = self.draws[0].residuals.keys() if self.draws else []
        return {k: max(d.residuals[k] for d in self.draws) for k in keys}

    @property
    def ok(self) -> bool:
        return all(v < self.tol for v in self.max_residuals().values())

    def to_dict(self) -> dict:
        worst = max(self.draws, key=lambda d: d.worst) if self.draws else None
        return {"seed": self.seed, "draws": len(self.draws), "tolerance": self.tol,
                "ok": self.ok, "max_residuals": self.max_residuals(),
                "worst_params": worst.params.to_dict() if worst else None}


def check_identities(p: ModelParams) -> DrawResult:
    """Largest absolute coefficient residual of every exact identity."""
    ls = ladder.ladder_operators(p, strict=False)
    ops = ls.ops
    scale = max(op.max_abs() for op in ops.values())
    res: dict[str, float] = {}

    comm = 0.0
    for (i, a), (j, ab) in itertools.product(enumerate(("a+", "a-")), enumerate(("abar+", "abar-"))):
        c = commutator(ops[a], ops[ab])
        comm = max(comm, (c - (1.0 if i == j else 0.0)).max_abs())
    for a, b in (("a+", "a-"), ("abar+", "abar-")):
        comm = max(comm, commutator(ops[a], ops[b]).max_abs())
    res["commutators"] = comm

    rho0 = gauss.relaxed_state(p)
    ann = max(gauss.max_coefficient(gauss.apply(ops[k], rho0)) for k in ("a+", "a-"))
    res["a_annihilates_rho0"] = ann
    bops = gauss.b_operators(p)
    res["b_annihilates_rho0"] = max(gauss.max_coefficient(gauss.apply(bops[k], rho0))
                                    for k in ("b", "b_d"))

    expected = {"a+": "-+", "a-": "--", "abar+": "+-", "abar-": "++"}
    shift = ls.shift_residual
    if ls.pairing != expected:
        shift = float("inf")
    res["eigen_shift"] = shift

    det = 0.0
    for s, t in itertools.permutations(ladder.BASES, 2):
        det = max(det, abs(ladder.basis_transform(s, t, p).det - 1))
    res["unit_determinant"] = det

    el = max(c.error for c in ladder.printed_element_checks(p, "resolved"))
    res["printed_elements"] = el

    diag = ladder.diagonal_form_check(p, tol=float("inf"))
    res["diagonal_form"] = diag.residual
    return DrawResult(p, res, scale)


def verification_sweep(seed: int = 7, draws: int = 100) -> SweepReport:
    rng = np.random.default_rng(seed)
    rep = SweepReport(seed)
    for _ in range(draws):
        rep.draws.append(check_identities(random_params(rng)))
    return rep
