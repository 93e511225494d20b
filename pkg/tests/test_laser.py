import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import RK45
from scipy.optimize import brentq

from laserleak import _kernel
from laserleak.drive import DriveWaveform, Pulse, pulse_train
from laserleak.errors import NoConvergence
from laserleak.laser import Stepper, gain, integrate, li_curve, rate_rhs, steady_state
from laserleak.params import DEFAULT_PARAMS
from laserleak.pulses import segment_pulses

P = DEFAULT_PARAMS
LINEAR = P.replace(B=0.0, C=0.0, beta_sp=0.0)


def relaxation(p, I, n0, t):
    n_inf = p.eta_i * I / (p.q * p.V * p.A)
    return n_inf + (n0 - n_inf) * np.exp(-p.A * t)


# ----------------------------------------------------------------- gain, rhs

def test_gain_examples():
    assert gain(P, P.N_tr, 0.0) == 0.0
    assert gain(P, P.N_tr, 3e21) == 0.0
    assert gain(P, math.e * P.N_tr, 0.0) == pytest.approx(P.g0, rel=1e-14)
    assert gain(P, math.e * P.N_tr, 1 / P.eps) == pytest.approx(P.g0 / 2, rel=1e-14)


def test_gain_is_clamped_below_the_floor():
    assert gain(P, 0.0, 0.0) == gain(P, P.n_floor, 0.0) == pytest.approx(P.g0 * math.log(1e-3))
    assert gain(P, 0.5 * P.N_tr, 0.0) < 0


def test_rhs_empty_laser_stays_empty():
    assert rate_rhs(P, 0.0, 0.0, 0.0, 0.0) == (0.0, 0.0)


@given(st.floats(0, 1e25), st.floats(0, 5e-3))
def test_rhs_no_photons_no_seeding(n, current):
    _, dnp = rate_rhs(P.replace(beta_sp=0.0), 0.0, n, 0.0, current)
    assert dnp == 0.0


def test_rhs_matches_relaxation_derivative():
    I, n0 = 1e-3, 3e24
    for t in np.linspace(0, 100e-9, 11):
        n = relaxation(LINEAR, I, n0, t)
        expected = -LINEAR.A * (n - LINEAR.eta_i * I / (LINEAR.q * LINEAR.V * LINEAR.A))
        dn, _ = rate_rhs(LINEAR, t, n, 0.0, I, gain_on=False)
        assert dn == pytest.approx(expected, rel=1e-9)


def test_rhs_agrees_with_compiled_kernel():
    from laserleak.laser import pack

    p = pack(P)
    for n, s, cur in [(1e24, 1e20, 1e-3), (5e24, 3e21, 8e-3), (0.0, 0.0, 0.0)]:
        assert np.allclose(_kernel.rhs(p, n, s, cur), rate_rhs(P, 0.0, n, s, cur), rtol=1e-14)


def test_rhs_accepts_callable_drive():
    d = DriveWaveform(1e-3, (Pulse(1e-9, 2e-3, 5e-10),), 3e-9)
    assert rate_rhs(P, 1.3e-9, 2e24, 0.0, d.current) == rate_rhs(P, 1.3e-9, 2e24, 0.0, 3e-3)


# ---------------------------------------------------------------- integrator

def test_dense_output_matrix_is_shampines():
    assert np.allclose(_kernel.DENSE_P, RK45.P, rtol=0, atol=0)


def test_zero_drive_stays_at_origin():
    tr = integrate(P, DriveWaveform(0.0, (), 5e-9), (0.0, 0.0))
    assert not tr.N.any() and not tr.Np.any()


def test_analytic_relaxation_oracle():
    I, n0 = 1.5e-3, 0.0
    tr = integrate(LINEAR, DriveWaveform(I, (), 100e-9), (n0, 0.0), 100e-12, gain_on=False)
    exact = relaxation(LINEAR, I, n0, tr.t)
    rel = np.abs(tr.N[1:] / exact[1:] - 1)
    assert rel.max() < 1e-6


def test_trajectory_invariants():
    d = pulse_train(0.3 * P.i_th, [0.5e-9, 2.5e-9], 4 * P.i_th, 500e-12, 4e-9)
    tr = integrate(P, d, (0.0, 0.0), 1e-12)
    assert len(tr.t) == len(tr.N) == len(tr.Np) == len(tr.P) == len(tr.I) == 4001
    assert np.all(np.diff(tr.t) > 0)
    assert np.array_equal(tr.P, P.power_factor * tr.Np)
    pf = P.kappa * 6.62607015e-34 * 299792458.0 / P.wavelength * (P.V / P.Gamma) / P.tau_p
    assert P.power_factor == pytest.approx(pf, rel=1e-12)


def test_second_pulse_is_earlier_and_stronger():
    d = pulse_train(0.0, [0.0, 2e-9], 4 * P.i_th, 500e-12, 3.5e-9)
    tr = integrate(P, d, (0.0, 0.0))
    first, second = segment_pulses(tr, d, 1.5e-9, baseline=0.0)
    assert second.turn_on_delay < first.turn_on_delay
    assert second.energy > 1.2 * first.energy
    # the leading relaxation spike is set by the pump rate at threshold, which
    # both pulses share; the extra energy comes from lasing for longer
    assert second.peak_power == pytest.approx(first.peak_power, rel=1e-3)


def test_grid_refinement_changes_energy_little():
    d = pulse_train(0.0, [0.0, 2e-9], 4 * P.i_th, 500e-12, 3.5e-9)
    coarse = segment_pulses(integrate(P, d, (0.0, 0.0), 1e-12), d, 1.5e-9, baseline=0.0)
    fine = segment_pulses(integrate(P, d, (0.0, 0.0), 0.5e-12, rtol=1e-9), d, 1.5e-9, baseline=0.0)
    for a, b in zip(coarse, fine):
        assert a.energy == pytest.approx(b.energy, rel=1e-3)


def test_integration_is_bit_deterministic():
    d = pulse_train(0.6 * P.i_th, [0.3e-9, 1.7e-9], 4 * P.i_th, 500e-12, 3e-9)
    a = integrate(P, d, (1e24, 0.0))
    b = integrate(P, d, (1e24, 0.0))
    assert a.N.tobytes() == b.N.tobytes() and a.Np.tobytes() == b.Np.tobytes()


def test_stepper_spans_match_one_shot():
    d = pulse_train(0.2 * P.i_th, [0.5e-9, 3e-9], 4 * P.i_th, 500e-12, 5e-9)
    t = 1e-12 * np.arange(5001)
    whole = integrate(P, d, (0.0, 0.0))
    st_ = Stepper(P, d)
    parts = np.vstack([st_.advance(2e-9, t[:2001]), st_.advance(5e-9, t[2001:])])
    assert np.allclose(parts[:, 1], whole.Np, rtol=1e-6, atol=1e-6 * P.N_tr)


@pytest.mark.parametrize("frac", [0.0, 0.6, 1.5])
def test_stiff_idle_agrees_with_tight_explicit(frac):
    I = frac * P.i_th
    op = steady_state(P, I)
    d = DriveWaveform(I, (Pulse(0.0, 4 * P.i_th, 500e-12),), 30e-9)
    states = []
    for stiff, atol_rel in ((False, 1e-12), (True, 1e-6)):
        st_ = Stepper(P, d, (op.N_ss, op.Np_ss), stiff_idle=stiff, atol_rel=atol_rel)
        st_.advance(1.5e-9, np.linspace(0, 1.5e-9, 16))
        st_.advance(30e-9)
        states.append(st_.state)
    (n_ref, s_ref), (n, s) = states
    atol = 1e-6 * P.N_tr
    assert abs(n - n_ref) < 10 * atol + 1e-7 * n_ref
    assert abs(s - s_ref) < 10 * atol + 1e-5 * s_ref


def test_radau_step_is_fifth_order():
    # error of one step on the linear relaxation problem shrinks like h^6
    p = _kernel_params(LINEAR, gain_on=False)
    n_inf = LINEAR.eta_i * 1e-3 / (LINEAR.q * LINEAR.V * LINEAR.A)
    errs = []
    for h in (4e-9, 2e-9):
        ok, n1, _ = _kernel.radau_step(p, 1e-3, 0.0, 0.0, h, 1e10, 1e10)
        assert ok
        errs.append(abs(n1 - (n_inf - n_inf * math.exp(-LINEAR.A * h))))
    assert 40 < errs[0] / errs[1] < 90


def _kernel_params(params, gain_on=True):
    from laserleak.laser import pack

    return pack(params, gain_on)


@given(
    f_tau=st.floats(0.5, 2.0), f_a=st.floats(0.5, 2.0), f_b=st.floats(0.5, 2.0),
    dc=st.floats(0.0, 1.5), amp=st.floats(0.0, 6.0), fwhm=st.floats(200e-12, 800e-12),
    n0=st.floats(0.0, 3.0), s0=st.floats(0.0, 1e22),
)
def test_trajectories_stay_non_negative(f_tau, f_a, f_b, dc, amp, fwhm, n0, s0):
    p = P.replace(tau_p=P.tau_p * f_tau, A=P.A * f_a, B=P.B * f_b)
    d = pulse_train(dc * p.i_th, [0.2e-9, 1.4e-9], amp * p.i_th, fwhm, 2.5e-9,
                    rise_fall=min(150e-12, fwhm))
    tr = integrate(p, d, (n0 * p.N_tr, s0), 2e-12)
    assert (tr.N >= 0).all() and (tr.Np >= 0).all()


# -------------------------------------------------------------- steady state

def test_zero_current_steady_state():
    op = steady_state(P, 0.0)
    assert (op.N_ss, op.Np_ss, op.P_ss) == (0.0, 0.0, 0.0)


def test_steady_state_without_spontaneous_coupling_matches_cubic_root():
    p = P.replace(beta_sp=0.0)
    I = 0.6 * p.i_th
    op = steady_state(p, I)
    target = p.eta_i * I / (p.q * p.V)
    root = brentq(lambda n: p.A * n + p.B * n**2 + p.C * n**3 - target, 0.0, p.n_th, xtol=1e-6, rtol=1e-15)
    assert op.Np_ss == 0.0
    assert op.N_ss == pytest.approx(root, rel=1e-10)


@pytest.mark.parametrize("frac", [0.0, 0.3, 0.6, 0.9, 1.5, 2.0, 4.0])
def test_steady_state_matches_long_integration(frac):
    I = frac * P.i_th
    op = steady_state(P, I)
    st_ = Stepper(P, DriveWaveform(I, (), 1e-6), stiff_idle=True)
    st_.advance(1e-6)
    n, s = st_.state
    assert n == pytest.approx(op.N_ss, rel=1e-3, abs=1e-9 * P.N_tr)
    assert s == pytest.approx(op.Np_ss, rel=1e-3, abs=1e-30)


@pytest.mark.parametrize("frac", [0.3, 0.9, 1.5, 4.0])
def test_steady_state_residual_is_small(frac):
    I = frac * P.i_th
    op = steady_state(P, I)
    dn, ds = rate_rhs(P, 0.0, op.N_ss, op.Np_ss, I)
    src = P.eta_i * I / (P.q * P.V)
    assert abs(dn) < 1e-9 * src
    assert abs(ds) < 1e-9 * max(op.Np_ss / P.tau_p, 1.0)


def test_threshold_straddling_ratio():
    assert steady_state(P, 1.5 * P.i_th).Np_ss / steady_state(P, 0.9 * P.i_th).Np_ss > 100


@pytest.mark.parametrize("frac", [1.2, 1.5, 2.0, 3.0, 4.0])
def test_carrier_clamping(frac):
    n = steady_state(P, frac * P.i_th).N_ss
    assert P.n_th <= n <= 1.05 * P.n_th


# --------------------------------------------------------------- L-I curve

def test_li_curve_at_zero():
    assert li_curve(P, [0.0]) == [(0.0, 0.0)]


def test_li_curve_knee_and_linearity():
    grid = np.linspace(0, 4 * P.i_th, 161)
    I, pw = np.array(li_curve(P, grid)).T
    assert np.all(np.diff(pw) >= 0)
    slope = np.diff(pw) / np.diff(I)
    mid = 0.5 * (I[1:] + I[:-1])
    above = slope[mid > 1.2 * P.i_th].min()
    below = slope[mid < 0.8 * P.i_th].max()
    assert above / below > 100
    sel = I[1:-1] > 1.5 * P.i_th
    second = np.abs(np.diff(pw, 2))[sel]
    local = np.abs(np.diff(pw)[1:][sel])
    assert np.all(second < 0.01 * local)


def test_li_curve_rejects_bad_grids():
    with pytest.raises(ValueError):
        li_curve(P, [1e-3, 0.5e-3])
    with pytest.raises(ValueError):
        li_curve(P, [-1e-3])


def test_li_curve_reports_grid_index(monkeypatch):
    import laserleak.laser as laser

    def boom(params, I):
        if I > 1e-3:
            raise NoConvergence("stuck")
        return laser.OperatingPoint(0.0, 0.0, 0.0)

    monkeypatch.setattr(laser, "steady_state", boom)
    with pytest.raises(NoConvergence, match="grid index 2"):
        laser.li_curve(P, [0.0, 1e-3, 2e-3])
