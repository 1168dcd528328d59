import numpy as np
import pytest
import sympy as sp
from hypothesis import given

from openosc import gauss
from openosc.moments import (CONVENTIONS, derive_moment_system, euler_lagrange_residuals,
                             growing_fluctuation, observable, T)
from openosc.params import ModelParams

from conftest import valid_params


def test_reference_covariance(reference):
    sigma = derive_moment_system(reference).stationary_covariance()
    np.testing.assert_allclose(sigma, [[1.0, -0.5], [-0.5, 1.5]], atol=1e-12)


def test_drift_matrix(reference):
    A = derive_moment_system(reference).A
    np.testing.assert_allclose(A, [[0, 1], [-1, -1]], atol=1e-14)


@pytest.mark.parametrize("convention", CONVENTIONS)
@given(p=valid_params())
def test_fixed_point_matches_closed_forms(convention, p):
    sigma = derive_moment_system(p, convention).stationary_covariance()
    assert sigma[0, 0] == pytest.approx(p.x2(), rel=1e-10)
    assert sigma[1, 1] == pytest.approx(p.p2(), rel=1e-10, abs=1e-12)
    assert sigma[0, 1] == pytest.approx(-p.d2 / 2, abs=1e-10)


@given(valid_params())
def test_relaxed_width_differs_from_momentum_variance(p):
    # p2 = R^2 + S^4 / Q^2: the two agree only without the d2 coupling
    r = gauss.relaxed_parameters(p)
    assert p.p2() == pytest.approx(r.R2 + r.S2**2 / r.Q2, rel=1e-10, abs=1e-12)


@given(valid_params())
def test_first_moments_decay_at_half_nu(p):
    eig = derive_moment_system(p).eigenvalues()
    np.testing.assert_allclose(np.sort(eig.real).sum(), -p.nu, atol=1e-10)


def test_covariance_relaxes(reference):
    ms = derive_moment_system(reference)
    s = ms.covariance(np.diag([3.0, 0.2]), 40.0)
    np.testing.assert_allclose(s, ms.stationary_covariance(), atol=1e-8)


def test_observable_words():
    assert observable("xp").degree == 2
    with pytest.raises(ValueError):
        observable("x", "bogus")


def test_gaussian_state_matches_moment_system(reference):
    st = gauss.relaxed_state(reference)
    assert gauss.expectation("xx", st).real == pytest.approx(reference.x2(), abs=1e-12)
    assert gauss.expectation("pp", st).real == pytest.approx(reference.p2(), abs=1e-12)


def test_euler_lagrange(reference):
    res_x, res_xd = euler_lagrange_residuals(reference)
    times = np.linspace(0, 3, 13)
    w = np.sqrt(3) / 2
    damped = sp.exp(-T / 2) * sp.cos(w * T)
    assert res_x(damped, sp.Integer(0), times) < 1e-12
    assert res_xd(growing_fluctuation(reference), times) < 1e-12
    # a damped fluctuation is not a solution
    assert res_xd(damped, times) > 1e-3
