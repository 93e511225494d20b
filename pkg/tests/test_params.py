import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from laserleak.errors import ValidationError
from laserleak.params import DEFAULT_PARAMS, LaserParams, threshold


def test_defaults_are_mA_scale():
    n_th, i_th = threshold(DEFAULT_PARAMS)
    assert n_th > DEFAULT_PARAMS.N_tr
    assert 0.1e-3 < i_th < 10e-3


def test_threshold_closed_form():
    p = DEFAULT_PARAMS
    loss_gain = p.Gamma * p.v_g * p.g0 * p.tau_p
    n_th = p.N_tr * math.exp(1 / loss_gain)
    assert p.n_th == pytest.approx(n_th, rel=1e-15)
    rec = p.A * n_th + p.B * n_th**2 + p.C * n_th**3
    assert p.i_th == pytest.approx(p.q * p.V * rec / p.eta_i, rel=1e-14)


def test_vanishing_loss_pins_threshold_at_transparency():
    p = DEFAULT_PARAMS.replace(tau_p=1e-6, g0=1e7)
    assert p.n_th == pytest.approx(p.N_tr, rel=1e-6)


@pytest.mark.parametrize("name,value", [("Gamma", 1.5), ("eta_i", 1.01), ("kappa", 2.0), ("V", 0.0),
                                        ("tau_p", -1e-12), ("A", float("nan")), ("g0", float("inf"))])
def test_invalid_values_name_the_field(name, value):
    with pytest.raises(ValidationError) as exc:
        DEFAULT_PARAMS.replace(**{name: value})
    assert exc.value.field == name


def test_charge_is_fixed():
    with pytest.raises(ValidationError):
        LaserParams(q=1.0)


@given(st.floats(0.2, 5.0), st.floats(0.2, 5.0))
def test_threshold_exceeds_transparency(f_tau, f_g0):
    p = DEFAULT_PARAMS.replace(tau_p=2e-12 * f_tau, g0=1.6e5 * f_g0)
    n_th, i_th = threshold(p)
    assert n_th > p.N_tr and i_th > 0
