"""Acceptance criteria 1-10, one PASS/FAIL line each (see the terminal summary)."""

import filecmp
import math

import numpy as np
import pytest

from openosc import analysis, gauss, grid, ladder
from openosc.cli import run as cli_run
from openosc.diffop import build_generator, closed_ladder_ops
from openosc.moments import derive_moment_system
from openosc.params import ModelParams
from openosc.verify import random_params, verification_sweep

REF = ModelParams(1.0, 1.0, 1.0, 0.0)
EXACT_TOL = 1e-12


def test_criterion_01_algebraic_identities(acceptance):
    rep = verification_sweep(seed=7, draws=100)
    worst = rep.max_residuals()
    detail = ", ".join(f"{k}={v:.1e}" for k, v in worst.items())
    ok = len(rep.draws) == 100 and all(v < EXACT_TOL for v in worst.values())
    assert acceptance(1, ok, f"100 draws, max residuals: {detail} (tol {EXACT_TOL:g})")


def test_criterion_02_diagonal_form(acceptance):
    rng = np.random.default_rng(11)
    draws = [REF] + [random_params(rng) for _ in range(30)]
    unique, residual, decay = True, 0.0, True
    for p in draws:
        d = ladder.diagonal_form_check(p)
        unique &= d.n_within_tol == 1 and d.coefficients == ("+-", "++")
        residual = max(residual, d.residual)
        if p.nu < 2:
            decay &= all(abs(v.real + p.nu / 2) < EXACT_TOL for v in d.values)
        else:
            decay &= abs(sum(v.real for v in d.values) + p.nu) < EXACT_TOL
    ok = unique and residual < EXACT_TOL and decay
    assert acceptance(2, ok, f"{len(draws)} draws, unique assignment (+-, ++) = {unique}, "
                             f"max residual {residual:.1e}, decay real parts ok = {decay}")


def test_criterion_03_stationary_spectrum(acceptance):
    worst_eig, worst_tr = 0.0, 0.0
    for p in (REF, ModelParams(0.4, 0.3, 1.7, 0.2), ModelParams(3.1, 1.0, 0.5, -0.2)):
        L = build_generator(p)
        for m in range(4):
            for n in range(4):
                st = ladder.ladder_state(m, n, "a", p)
                lhs = gauss.apply(L, st)
                rhs = st.scale(ladder.eigenvalue(m, n, p.nu))
                worst_eig = max(worst_eig, gauss.coefficient_residual(lhs, rhs))
                worst_tr = max(worst_tr, abs(gauss.trace(st) - (1 if m == n == 0 else 0)))
    ok = worst_eig < EXACT_TOL and worst_tr < EXACT_TOL
    assert acceptance(3, ok, f"m,n <= 3 at 3 parameter sets: eigen residual {worst_eig:.1e}, "
                             f"trace residual {worst_tr:.1e}")


def test_criterion_04_moment_fixed_point(acceptance):
    rng = np.random.default_rng(5)
    worst_xx, worst_pp, worst_r2 = 0.0, 0.0, 0.0
    for p in [REF] + [random_params(rng) for _ in range(20)]:
        sigma = derive_moment_system(p).stationary_covariance()
        worst_xx = max(worst_xx, abs(sigma[0, 0] - p.dsum / (2 * p.nu)))
        worst_pp = max(worst_pp, abs(sigma[1, 1] - p.p2()))
        worst_r2 = max(worst_r2, abs(sigma[1, 1] - gauss.relaxed_parameters(p).R2))
    winner = "closed-form <p^2>" if worst_pp < worst_r2 else "R^2"
    ok = worst_xx < EXACT_TOL
    assert acceptance(4, ok, f"Sigma_xx residual {worst_xx:.1e}; <p^2> fixed point matches {winner} "
                             f"(residual {worst_pp:.1e}); R^2 differs by up to {worst_r2:.3g}")


@pytest.fixture(scope="module")
def reference_grid():
    g = grid.GridSpec(128, 8.0)
    return g, grid.discretize_generator(REF, g)


def test_criterion_05_grid_cross_checks(acceptance, reference_grid):
    g, op = reference_grid
    rho0 = grid.GridField.sample(gauss.relaxed_state(REF), g)

    # stationarity
    res0 = grid.evolve(rho0, REF, 5.0, generator=op)
    stat = np.max(np.abs(res0.field.values - rho0.values)) / np.max(np.abs(rho0.values))

    # rho_{1,1} decay: difference of perturbed and unperturbed runs, projected on rho_{1,1}
    e11 = grid.GridField.sample(ladder.ladder_state(1, 1, "a", REF), g).values
    amp = lambda f: np.vdot(e11, f.values) / np.vdot(e11, e11)
    pert = grid.GridField(rho0.values + 0.1 * e11, g)
    ra = grid.evolve(pert, REF, 5.0, sample_every=0.05, probes={"a": amp}, generator=op)
    rb = grid.evolve(rho0, REF, 5.0, sample_every=0.05, probes={"a": amp}, generator=op)
    rate = grid.fit_decay(ra.times, ra.samples["a"] - rb.samples["a"])

    # coherent-state first moment
    w = 0.5 + 0.2j
    fw = grid.GridField.sample(ladder.w_coherent_state(w, None, REF), g)
    rw = grid.evolve(fw, REF, 5.0, sample_every=0.05,
                     probes={"x": lambda f: grid.grid_expectation(f, "x")}, generator=op)
    x_exact, _ = ladder.coherent_first_moments(w, rw.times, REF)
    x_err = np.max(np.abs(rw.samples["x"] - x_exact)) / np.max(np.abs(x_exact))
    x_printed, _ = ladder.printed_coherent_moments(w, rw.times, REF)
    printed_err = np.max(np.abs(x_printed - x_exact)) / np.max(np.abs(x_exact))

    # convergence of the discrete generator on rho_0
    errs, hs = [], []
    for N in (64, 128, 256):
        gg = grid.GridSpec(N, 8.0)
        f = grid.GridField.sample(gauss.relaxed_state(REF), gg)
        errs.append(np.max(np.abs(grid.apply_generator(grid.discretize_generator(REF, gg), f).values)))
        hs.append(gg.h)
    order = grid.convergence_order(errs, hs)

    checks = {
        "stationarity": stat < 1e-4,
        "rho11 rate": abs(-rate.real - 1.0) <= 0.02 and abs(rate.imag) <= 0.02,
        "coherent <x>": x_err < 1e-3,
        "order": abs(order - 2.0) <= 0.2,
    }
    ok = all(checks.values())
    assert acceptance(5, ok, f"stationarity {stat:.2e} (<1e-4 {checks['stationarity']}); "
                             f"rho11 rate {-rate.real:.4f} (1 +- 2% {checks['rho11 rate']}); "
                             f"<x(t)> rel err {x_err:.2e} (<1e-3 {checks['coherent <x>']}, "
                             f"printed closed form off by {printed_err:.2f}); "
                             f"order {order:.3f} ({checks['order']})")


def _random_queries(n: int, seed: int = 3):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        t_prep = rng.uniform(0, 0.5)
        out.append(analysis.DecoherenceQuery(
            w=complex(rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6)),
            z_obs=rng.uniform(-1.5, 1.5), z_prep=rng.uniform(-1, 1),
            delta_z=None if rng.random() < 0.3 else rng.uniform(0.5, 2.0),
            t_prep=t_prep, t_obs=t_prep + rng.uniform(0, 1)))
    return out


def test_criterion_06_decoherence_three_way(acceptance):
    queries = _random_queries(20)
    direct, localized, grid_err, raw_err = 0.0, 0.0, 0.0, 0.0
    for q in queries:
        a = analysis.audit(q, REF)
        direct = max(direct, a.discrepancy)
        # replace only the Gaussian prefactor of the closed form by its exact value
        repaired = a.closed_form * a.gaussian_exact / a.gaussian_closed
        localized = max(localized, abs(repaired - a.exact),
                        abs(a.shift_factor_closed - a.shift_factor_exact))
        coarse = analysis.grid_decoherence(q, REF, N=128)
        fine = analysis.grid_decoherence(q, REF, N=256)
        raw_err = max(raw_err, abs(coarse - a.exact))
        grid_err = max(grid_err, abs((4 * fine - coarse) / 3 - a.exact))
    two = analysis.decoherence_expectation(analysis.DecoherenceQuery(0.3 - 0.2j, 0.0), REF, "closed-form")
    two_exact = analysis.weyl_exact(analysis.DecoherenceQuery(0.3 - 0.2j, 0.0), REF)
    closed_ok = direct < 1e-10 or localized < 1e-10
    checks = {"closed": closed_ok, "grid": grid_err < 1e-3, "two": two == 2.0 and two_exact == 2.0}
    ok = all(checks.values())
    assert acceptance(6, ok, f"20 queries: closed vs exact {direct:.2e}, localized to the Gaussian "
                             f"<p^2> prefactor with remainder {localized:.1e} ({closed_ok}); "
                             f"grid (N=128/256 Richardson) vs exact {grid_err:.2e} (<1e-3 {checks['grid']}, "
                             f"plain N=128 {raw_err:.2e}); "
                             f"unfiltered z=0 value {two!r} ({checks['two']})")


def test_criterion_07_thermalization(acceptance):
    rows = analysis.weak_coupling_scan(0.5, [1e-1, 1e-2, 1e-3])
    errs = [abs(r["beta_omega"] - math.log(3)) for r in rows]
    decreasing = all(a > b for a, b in zip(errs, errs[1:]))
    gibbs = analysis.gibbs_deviation(analysis.weak_coupling_direction(0.5).scaled(1e-3))
    r = gauss.relaxed_parameters(ModelParams(1.0, 1.0, 0.0, 0.0))
    pure_gap = abs(math.sqrt(r.Q2) - 2 * math.sqrt(r.R2))
    pure = analysis.thermal_map(ModelParams(1.0, 1.0, 0.0, 0.0)).classification == "pure-ground-state"
    ok = decreasing and errs[-1] < 1e-4 and gibbs < 1e-6 and pure_gap < 1e-10 and pure
    assert acceptance(7, ok, f"|beta_omega - ln 3| = {', '.join(f'{e:.1e}' for e in errs)}; "
                             f"Gibbs deviation {gibbs:.1e} (<1e-6); |Q - 2R| = {pure_gap:.1e}, "
                             f"classified pure = {pure}")


def test_criterion_08_singular_scans(acceptance):
    d = np.logspace(-5.5, -1, 20)
    scan = analysis.critical_damping_scan(np.concatenate([2 - d, 2 + d]), REF)
    exps = scan["z_abs2_exponent"]
    gap = analysis.classical_continuity_gap(1e-3, 5.0)
    q2 = analysis.weak_coupling_scan(0.5, [1e-3])[0]["Q2"]
    # closed oscillator ground state: the Gaussian annihilated by both closed lowering operators
    ground = gauss.gaussian_state(2.0, 0.5, 0.0)
    closed = closed_ladder_ops()
    closed_res = max(gauss.max_coefficient(gauss.apply(closed[k], ground)) for k in ("c+", "c-"))
    limit = gauss.gaussian_state(q2, 1 / q2, 0.0)
    limit_res = max(gauss.max_coefficient(gauss.apply(closed[k], limit)) for k in ("c+", "c-"))
    jump = abs(q2 - 1) < 1e-4 and closed_res < EXACT_TOL and limit_res > 0.1
    ok = all(abs(e + 0.5) <= 0.02 for e in exps.values()) and gap < 1e-2 and jump
    assert acceptance(8, ok, f"|z|^2 exponent below {exps['below']:.4f} above {exps['above']:.4f} "
                             f"both {exps['both']:.4f}; classical gap {gap:.1e}; "
                             f"Q^2(g=1e-3) = {q2:.6f} vs closed ground state Q^2 = 2 "
                             f"(jump shown {jump})")


def test_criterion_09_positivity(acceptance):
    rho0 = gauss.relaxed_state(REF)
    rho11 = ladder.ladder_state(1, 1, "a", REF).scale(math.sqrt(4 - REF.nu**2))
    e0 = gauss.positivity_check(rho0, N=128)
    e11 = gauss.positivity_check(rho11, N=128)
    ok = e0 >= -1e-8 and e11 >= -1e-8
    assert acceptance(9, ok, f"min eigenvalue rho_0 {e0:.2e}; (4 - nu^2)^(1/2) rho_11 {e11:.3f} "
                             f"(traceless and nonzero, so it must have a negative eigenvalue)")


def test_criterion_10_determinism(acceptance, tmp_path):
    commands = [["verify-algebra", "--seed", "3", "--draws", "10"],
                ["relaxed", "--nu", "1", "--d0", "1", "--d2", "1"],
                ["scan-critical", "--count", "8", "--plot-spec"],
                ["evolve-moments", "--nu", "0.7", "--d0", "1", "--d2", "0.4"],
                ["decohere", "--nu", "1", "--d0", "1", "--d2", "1", "--w", "0.3+0.1j",
                 "--delta-z", "1", "--t-obs", "0.5"]]
    codes = []
    for tag in ("a", "b"):
        for cmd in commands:
            codes.append(cli_run([*cmd, "--quiet", "--out", str(tmp_path / tag)]))
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    match, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", files, shallow=False)
    ok = all(c == 0 for c in codes) and not mismatch and not errors and len(match) == len(files)
    assert acceptance(10, ok, f"{len(files)} output files from {len(commands)} commands run twice: "
                              f"{len(match)} byte-identical, {len(mismatch)} differ")
