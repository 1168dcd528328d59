import math

import numpy as np
import pytest
from hypothesis import given

from openosc import gauss
from openosc.diffop import DiffOp, build_generator
from openosc.params import ModelParams

from conftest import valid_params


def test_reference_relaxed_parameters(reference):
    r = gauss.relaxed_parameters(reference)
    assert (r.Q2, r.R2, r.S2) == pytest.approx((1.0, 1.25, 0.5), abs=1e-15)
    printed = gauss.printed_relaxed_parameters(reference)
    assert (printed.Q2, printed.R2, printed.S2) == pytest.approx((1.0, 2.0, 1.0), abs=1e-15)


def test_printed_parameters_are_not_stationary(reference):
    printed = gauss.printed_relaxed_parameters(reference)
    st_ = gauss.gaussian_state(printed.Q2, printed.R2, printed.S2)
    assert gauss.max_coefficient(gauss.apply(build_generator(reference), st_)) > 0.1


def test_printed_parameters_agree_without_d2():
    p = ModelParams(0.7, 1.3, 0.0, 0.1)
    a, b = gauss.relaxed_parameters(p), gauss.printed_relaxed_parameters(p)
    assert (a.Q2, a.R2, a.S2) == pytest.approx((b.Q2, b.R2, b.S2), abs=1e-15)


@given(valid_params())
def test_relaxed_state_is_stationary(p):
    st_ = gauss.relaxed_state(p)
    assert gauss.max_coefficient(gauss.apply(build_generator(p), st_)) < 1e-12
    assert abs(gauss.trace(st_) - 1) < 1e-12


@given(valid_params())
def test_relaxed_norm(p):
    st_ = gauss.relaxed_state(p)
    r = gauss.relaxed_parameters(p)
    assert gauss.overlap(st_, st_).real == pytest.approx(math.sqrt(r.Q2) / (2 * math.sqrt(r.R2)),
                                                         rel=1e-10)


@given(valid_params())
def test_b_operators_annihilate(p):
    rho0 = gauss.relaxed_state(p)
    for name in ("b", "b_d"):
        assert gauss.max_coefficient(gauss.apply(gauss.b_operators(p)[name], rho0)) < 1e-12


def test_b_basis_orthogonality(reference):
    rho0 = gauss.relaxed_state(reference)
    norm = gauss.overlap(rho0, rho0)
    states = {(m, n): gauss.b_basis_state(m, n, reference) for m in range(3) for n in range(3)}
    for k1, s1 in states.items():
        for k2, s2 in states.items():
            ov = gauss.overlap(s1, s2)
            expected = norm if k1 == k2 else 0
            assert abs(ov - expected) < 1e-11, (k1, k2)


def test_trace_against_quadrature(reference):
    st_ = gauss.b_basis_state(2, 0, reference).scale(0.3).multiply_gaussian(v2=(0.2, 0.0))
    from scipy.integrate import quad
    re = quad(lambda x: st_(np.array(x), np.array(0.0)).real, -30, 30)[0]
    im = quad(lambda x: st_(np.array(x), np.array(0.0)).imag, -30, 30)[0]
    assert abs(gauss.trace(st_) - complex(re, im)) < 1e-9


def test_integrate_against_grid(reference):
    st_ = gauss.relaxed_state(reference)
    x = np.linspace(-12, 12, 801)
    X, Y = np.meshgrid(x, x, indexing="ij")
    h = x[1] - x[0]
    assert abs(gauss.integrate(st_) - st_(X, Y).sum() * h * h) < 1e-9


def test_expectation_conventions_agree_on_even_words(reference):
    st_ = gauss.relaxed_state(reference)
    for word in ("xx", "pp"):
        a = gauss.expectation(word, st_, "left-mult")
        b = gauss.expectation(word, st_, "pd-simplified")
        assert abs(a - b) < 1e-12


def test_weyl_operator_matches_series(reference):
    op = DiffOp.linear([0.3, 0.1j, -0.2, 0.15])
    W = gauss.WeylOp.exp_of(op)
    st_ = gauss.relaxed_state(reference)
    series = st_
    term = st_
    for k in range(1, 25):
        term = gauss.apply(op, term).scale(1 / k)
        series = gauss.add(series, term)
    shifted = W(st_)
    x = np.linspace(-2, 2, 5)
    X, Y = np.meshgrid(x, x, indexing="ij")
    np.testing.assert_allclose(shifted(X, Y), series(X, Y), atol=1e-10)


def test_weyl_composition(reference):
    a = DiffOp.linear([0.2, 0.0, 0.1j, 0.3])
    b = DiffOp.linear([-0.1, 0.4, 0.0, 0.2j])
    st_ = gauss.relaxed_state(reference)
    lhs = (gauss.WeylOp.exp_of(a) @ gauss.WeylOp.exp_of(b))(st_)
    rhs = gauss.WeylOp.exp_of(a)(gauss.WeylOp.exp_of(b)(st_))
    assert lhs.is_close(rhs, 1e-12)


def test_state_roundtrip(tmp_path, reference):
    st_ = gauss.b_basis_state(1, 2, reference)
    path = tmp_path / "s.json"
    st_.save(path)
    assert gauss.GaussPolyState.load(path).is_close(st_, 0)


def test_hermiticity(reference):
    assert gauss.relaxed_state(reference).is_hermitian()
    assert not gauss.relaxed_state(reference).multiply_gaussian(v2=(0.0, 0.5)).is_hermitian()


def test_relaxed_state_positive(reference):
    assert gauss.positivity_check(gauss.relaxed_state(reference)) > -1e-8


def test_positivity_check_rejects_non_hermitian(reference):
    bad = gauss.relaxed_state(reference).multiply_gaussian(v2=(0.0, 0.5))
    with pytest.raises(ValueError):
        gauss.positivity_check(bad)
