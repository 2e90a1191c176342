import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from boussinesq5.model import (THETA_SQ_CANONICAL, TAU_CANONICAL, ConfigError,
                               ConstraintViolation, ModelCoefficients, PhysicalParameters,
                               appendix_identity_residual, coefficients_from_mapping,
                               derive_coefficients, parse_config, validate_coefficients)


def test_canonical_values():
    assert THETA_SQ_CANONICAL == pytest.approx(0.5 - 1 / (2 * math.sqrt(5)), abs=1e-15)
    assert TAU_CANONICAL == pytest.approx(2 / 3 - THETA_SQ_CANONICAL, abs=1e-15)


def test_derived_coefficients_at_unit_inputs(canon):
    assert canon.a == pytest.approx(-0.0284701, abs=1e-7)
    assert canon.b == pytest.approx(0.00121582, abs=1e-8)
    assert canon.a1 == 1.0 and canon.a3 == 1.0
    assert canon.a2 == pytest.approx(-0.3618034, abs=1e-7)
    assert canon.a4 == pytest.approx(1.7236068, abs=1e-7)


def test_zero_alpha_gives_linear_system():
    c = derive_coefficients(PhysicalParameters.canonical(0.0, 1.0))
    assert c.is_linear
    assert (c.a1, c.a2, c.a3, c.a4) == (0.0, 0.0, 0.0, 0.0)


def test_identity_residual_vanishes_at_canonical_theta():
    assert abs(appendix_identity_residual()) < 1e-12
    assert abs(appendix_identity_residual(0.3, 0.2)) > 1e-3


def test_noncanonical_theta_rejected():
    p = PhysicalParameters(1.0, 1.0, theta_sq=0.3, tau=0.2)
    with pytest.raises(ConstraintViolation):
        derive_coefficients(p)


def test_validation_examples(canon):
    ok = validate_coefficients(ModelCoefficients(a=1.0, b=1.0 + 1e-9, L=math.pi))
    assert ok.ok
    bad = validate_coefficients(ModelCoefficients(a=3.0, b=1.0))
    assert bad.failed() == ["4b > a^2"]
    rep = validate_coefficients(canon)
    assert rep.ok
    assert any("a < 0" in f for f in rep.flags)


def test_check_raises_with_constraint_name():
    with pytest.raises(ConstraintViolation) as err:
        ModelCoefficients(a=0.1, b=-1.0).check()
    assert err.value.constraint == "b > 0"


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 5.0), st.floats(0.05, 5.0))
def test_derived_coefficients_admissible(alpha, beta):
    c = derive_coefficients(PhysicalParameters.canonical(alpha, beta))
    assert c.b > 0 and 4 * c.b > c.a ** 2
    assert c.a2 < 0 < c.a3 and c.a4 > 0


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 5.0), st.floats(0.05, 5.0), st.floats(0.1, 4.0))
def test_nonlinear_coefficients_linear_in_alpha(alpha, beta, k):
    c1 = derive_coefficients(PhysicalParameters.canonical(alpha, beta))
    c2 = derive_coefficients(PhysicalParameters.canonical(k * alpha, beta))
    assert c2.a == c1.a and c2.b == c1.b
    for name in ("a1", "a2", "a3", "a4"):
        assert getattr(c2, name) == pytest.approx(k * getattr(c1, name), rel=1e-12)


def test_parse_config_and_errors():
    assert parse_config("alpha = 2 # comment\n\nbeta=1") == {"alpha": 2.0, "beta": 1.0}
    with pytest.raises(ConfigError) as err:
        parse_config("gamma = 1")
    assert err.value.token == "gamma"
    with pytest.raises(ConfigError) as err:
        parse_config("a = one")
    assert err.value.token == "one"
    with pytest.raises(ConfigError):
        parse_config("a=1\na=2")


def test_mapping_direct_and_derived(canon):
    assert coefficients_from_mapping({}) == canon
    c = coefficients_from_mapping({"a": 0.1, "b": 1.0, "L": 2.0})
    assert (c.a, c.b, c.L, c.a1) == (0.1, 1.0, 2.0, 0.0)
    with pytest.raises(ConfigError):
        coefficients_from_mapping({"a": 0.1})


def test_linearized_and_gains(canon):
    lin = canon.linearized()
    assert lin.is_linear and lin.a == canon.a
    g = canon.with_gains(0.0, 2.0)
    assert (g.alpha1, g.alpha2) == (0.0, 2.0)
    assert np.isclose(canon.as_dict()["b"], canon.b)
