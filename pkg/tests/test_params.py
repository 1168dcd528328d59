import json
import math

import pytest
from hypothesis import given, strategies as st

from openosc.params import (DimensionalInputs, InvalidParameters, ModelParams, derived_scales,
                            load_params, nondimensionalize, omega_nu, params_from_mapping,
                            redimensionalize, relaxed_r2, require_valid, validate)

from conftest import valid_params


def test_reference_moments(reference):
    assert reference.x2() == pytest.approx(1.0, abs=1e-15)
    assert reference.p2() == pytest.approx(1.5, abs=1e-15)
    assert relaxed_r2(reference) == pytest.approx(1.25, abs=1e-15)
    assert reference.kappa == pytest.approx(0.5)


def test_validation_rejects_bad_inputs():
    assert not validate(ModelParams(-1, 1, 1)).ok
    assert not validate(ModelParams(1, -1, 1)).ok
    assert not validate(ModelParams(1, 0, 0)).ok
    assert not validate(ModelParams(1, 1, 1, alpha=0.3)).ok
    assert not validate(ModelParams(float("nan"), 1, 1)).ok
    assert not validate(ModelParams(1, 1, 1, beta=5.0)).ok
    with pytest.raises(InvalidParameters):
        require_valid(ModelParams(1, 1, 1, beta=5.0))


def test_validation_warnings():
    rep = validate(ModelParams(3.0, 1, 1))
    assert rep.ok and any("over-damped" in w for w in rep.warnings)
    assert validate(ModelParams(1.0, 1, 1)).lindblad_ok
    assert not validate(ModelParams(1.0, 1, 0)).lindblad_ok


def test_omega_nu():
    assert omega_nu(1.0) == pytest.approx(math.sqrt(3) / 2, abs=1e-15)
    assert omega_nu(2.0) == 0
    assert omega_nu(4.0).real == pytest.approx(0.0) and omega_nu(4.0).imag == pytest.approx(math.sqrt(3))


def test_scales(reference):
    s = derived_scales(reference)
    assert s.ell_loc == pytest.approx(1.0)
    assert s.ell_inst2 == pytest.approx(1 / 1.5)
    assert s.kappa0_lindblad <= 1 / math.sqrt(2) + 1e-15
    assert s.relaxation_time == pytest.approx(2.0)
    d = s.to_dict()
    json.dumps(d)


def test_mapping_and_file(tmp_path):
    p = params_from_mapping({"nu": 1, "d0": 2, "d2": 0.5})
    assert p == ModelParams(1.0, 2.0, 0.5, 0.0)
    with pytest.raises(InvalidParameters):
        params_from_mapping({"nu": 1, "d0": 2})
    with pytest.raises(InvalidParameters):
        params_from_mapping({"nu": 1, "d0": 2, "d2": 1, "gamma": 3})
    f = tmp_path / "p.json"
    f.write_text(json.dumps({"nu": 2.0, "d0": 4.0, "d2": 1.0, "omega": 2.0}))
    q = load_params(f)
    assert q == ModelParams(1.0, 1.0, 1.0, 0.0)


@given(valid_params(), st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.1, 10))
def test_dimension_roundtrip(p, m, omega, hbar):
    back = nondimensionalize(redimensionalize(p, m, omega, hbar))
    for a, b in zip((back.nu, back.d0, back.d2, back.beta), (p.nu, p.d0, p.d2, p.beta)):
        assert a == pytest.approx(b, rel=1e-12, abs=1e-14)


def test_nondimensionalize_rejects_nonpositive_units():
    with pytest.raises(InvalidParameters):
        nondimensionalize(DimensionalInputs(1, 1, 1, omega=0.0))


@given(valid_params())
def test_valid_draws_validate(p):
    assert validate(p).ok
    assert p.x2() > 0 and p.p2() > 0


@given(valid_params(), st.floats(1e-3, 1.0))
def test_scaling_keeps_kappa(p, g):
    assert p.scaled(g).kappa == pytest.approx(p.kappa, rel=1e-12)
