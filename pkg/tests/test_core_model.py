import math
import warnings
from dataclasses import replace

import numpy as np
import pytest
from scipy import integrate
from hypothesis import given, strategies as st

from thzisl.core_model import (ArrayConfig, HardwareProfile, amplitude_profile, eta_bsq,
                               eta_bsq_avg, gain_breakdown, kappa, path_loss, rho_a, rho_ape,
                               rho_pn, rho_q)
from thzisl.errors import ModelValidityWarning, TaylorOutOfRange

# Reference values from mpmath at 30 digits.
ETA_AVG_BASELINE = 0.290813874895330796
ETA_AVG_16 = 0.569426416800163144
ETA_AVG_SMALL = 0.994541161687336220
ETA_POINT_L10 = 0.936116640921296682
RHO_Q_4BIT = 0.987214830766658107
RHO_APE_L1000 = 0.539641485816297176
PATH_LOSS_1000KM = 3.4437720231350822e19


def test_kappa_baseline(baseline_array):
    assert kappa(baseline_array) == pytest.approx(32 * (20 / 140) * 0.5, rel=1e-12)
    assert kappa(baseline_array) == pytest.approx(2.2857, abs=1e-4)


def test_aperture_uses_larger_array(baseline_array):
    cfg = replace(baseline_array, n_tx=16)
    assert cfg.aperture_wavelengths == 32.0
    assert cfg.aperture_tx_wavelengths == 8.0


def test_eta_point_value():
    cfg = ArrayConfig.from_aperture(10.0, 0.1, math.radians(30.0), 140e9)
    assert eta_bsq(0.02 * 140e9, cfg) == pytest.approx(ETA_POINT_L10, rel=1e-12)
    assert eta_bsq(0.0, cfg) == 1.0


def test_eta_avg_against_mpmath(baseline_array):
    assert eta_bsq_avg(baseline_array) == pytest.approx(ETA_AVG_BASELINE, rel=1e-9)
    cfg16 = ArrayConfig.from_aperture(16.0, 20 / 140, math.radians(30.0), 140e9)
    assert eta_bsq_avg(cfg16) == pytest.approx(ETA_AVG_16, rel=1e-9)
    small = ArrayConfig.from_aperture(4.0, 0.05, math.radians(30.0), 140e9)
    assert eta_bsq_avg(small) == pytest.approx(ETA_AVG_SMALL, rel=1e-9)


def test_eta_avg_broadside_is_one(baseline_array):
    assert eta_bsq_avg(replace(baseline_array, steer_angle_rad=0.0)) == 1.0


def test_taylor_close_for_small_kappa():
    cfg = ArrayConfig.from_aperture(4.0, 0.05, math.radians(30.0), 140e9)
    assert kappa(cfg) == pytest.approx(0.1)
    assert eta_bsq_avg(cfg, "taylor") == pytest.approx(eta_bsq_avg(cfg), abs=1e-4)


def test_taylor_refuses_large_kappa(baseline_array):
    with pytest.raises(TaylorOutOfRange):
        eta_bsq_avg(baseline_array, "taylor")


def test_rho_values(baseline_array):
    assert rho_q(4) == pytest.approx(RHO_Q_4BIT, rel=1e-12)
    cfg = ArrayConfig.from_aperture(1000.0, 0.1, math.radians(30.0), 140e9)
    assert rho_ape(cfg, 5e-4) == pytest.approx(RHO_APE_L1000, rel=1e-12)
    assert rho_a(0.1) == pytest.approx(math.exp(-0.01))
    assert rho_pn(HardwareProfile(), 140e9) == 1.0
    hw = HardwareProfile(rel_pn_var_tx=0.01, rel_pn_var_rx=0.02, diff_jitter_s=1e-15)
    assert rho_pn(hw, 140e9) == pytest.approx(math.exp(-(0.03 + (2 * math.pi * 140e9 * 1e-15) ** 2)))


def test_rho_a_warns_outside_small_error():
    with pytest.warns(ModelValidityWarning):
        rho_a(0.4)


def test_path_loss(baseline_array):
    assert path_loss(baseline_array) == pytest.approx(PATH_LOSS_1000KM, rel=1e-12)
    assert 10 * math.log10(path_loss(baseline_array)) == pytest.approx(195.37, abs=0.01)


def test_gain_breakdown_product(baseline_array):
    g = gain_breakdown(baseline_array, HardwareProfile(amp_err_rms=0.1, point_err_rad=1e-4))
    prod = g.g_ideal * g.eta_bsq_avg * g.rho_q * g.rho_ape * g.rho_a * g.rho_pn
    assert g.g_sig_avg == pytest.approx(prod, rel=1e-14)
    assert g.per_element * g.g_ideal == pytest.approx(g.g_sig_avg, rel=1e-14)


def test_amplitude_profile_band_average_matches_gain(baseline_array):
    hw = HardwareProfile(amp_err_rms=0.1, point_err_rad=1e-4)
    f = np.linspace(-10e9, 10e9, 400001)
    avg = integrate.trapezoid(np.asarray(amplitude_profile(f, baseline_array, hw)) ** 2, f) / 20e9
    assert avg == pytest.approx(gain_breakdown(baseline_array, hw).g_sig_avg, rel=1e-6)


@pytest.mark.parametrize("kw", [dict(n_tx=0), dict(spacing_wavelengths=0.0), dict(carrier_hz=-1.0),
                                dict(bandwidth_hz=0.0), dict(steer_angle_rad=2.0)])
def test_array_config_validation(baseline_array, kw):
    with pytest.raises(ValueError):
        replace(baseline_array, **kw)


def test_far_field(baseline_array):
    assert baseline_array.far_field_ok
    assert not replace(baseline_array, range_m=0.01).far_field_ok


@given(st.floats(0.5, 60.0), st.floats(0.005, 0.3), st.floats(0.0, 1.4))
def test_eta_avg_in_unit_interval(l_ap, bf, theta):
    cfg = ArrayConfig.from_aperture(l_ap, bf, theta, 140e9)
    v = eta_bsq_avg(cfg)
    assert 0.0 < v <= 1.0 + 1e-12


@given(st.floats(1.0, 40.0), st.floats(0.01, 0.2), st.floats(0.05, 1.2))
def test_eta_avg_decreases_with_bandwidth(l_ap, bf, theta):
    a = ArrayConfig.from_aperture(l_ap, bf, theta, 140e9)
    b = ArrayConfig.from_aperture(l_ap, bf * 1.2, theta, 140e9)
    assert eta_bsq_avg(b) <= eta_bsq_avg(a) + 1e-12


@given(st.integers(1, 12), st.floats(0.0, 0.3), st.floats(0.0, 1e-3))
def test_static_factors_bounded(bits, amp, point):
    cfg = ArrayConfig.from_aperture(32.0, 0.1, 0.5, 140e9)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ModelValidityWarning)
        for v in (rho_q(bits), rho_a(amp), rho_ape(cfg, point)):
            assert 0.0 < v <= 1.0
