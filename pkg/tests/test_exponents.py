import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from dhjkit.exponents import Regime, make_context


def test_p3_values():
    c = make_context(3.0)
    assert c.beta == 0.5
    assert c.gamma_ss == 0.25
    assert c.L_limit == pytest.approx(3**-0.5 / 1.5, rel=1e-15)
    assert c.L_limit == pytest.approx(0.3849002, abs=1e-7)
    assert c.c_p == pytest.approx(math.sqrt(2.0), rel=1e-15)
    assert c.regime is Regime.SUPERQUADRATIC


def test_p2_is_quadratic_without_cp():
    c = make_context(2.0)
    assert c.beta == 1.0 and c.gamma_ss == 0.0
    assert c.regime is Regime.QUADRATIC
    assert c.c_p is None


def test_p_one_and_a_half():
    c = make_context(1.5)
    assert c.beta == 2.0 and c.gamma_ss == -0.5
    assert c.c_p == pytest.approx(4.0)
    assert c.regime is Regime.SUBQUADRATIC


@pytest.mark.parametrize("p", [1.0, 0.5, -2.0, math.inf, math.nan])
def test_rejects_bad_p(p):
    with pytest.raises(ValueError):
        make_context(p)


@given(st.floats(min_value=1.001, max_value=50.0))
def test_identities(p):
    c = make_context(p)
    assert abs(c.beta * (p - 1) - 1) <= 1e-14
    assert abs(c.beta * p - (c.beta + 1)) <= 1e-12 * c.beta * p
    assert abs(c.gamma_ss - (1 - c.beta) / 2) <= 1e-12 * max(1.0, c.beta)
    assert c.L_limit > 0
    if p != 2.0:
        assert c.c_p > 0


def test_as_dict_roundtrip_fields():
    d = make_context(4.0).as_dict()
    assert list(d) == ["p", "beta", "gamma_ss", "c_p", "L_limit", "regime"]
    assert d["regime"] == "superquadratic"
