import math
from dataclasses import replace

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from thzisl.capacity import (LinkOperatingPoint, c_exact, c_jensen, c_sat, effective_sinr,
                             jensen_gap_taylor, knee_snr, sinr_at, snr_crit, snr_sweep)
from thzisl.core_model import ArrayConfig, HardwareProfile, gain_breakdown
from thzisl.errors import ZeroDistortion
from thzisl.noise_spectra import DistortionBudget, RsmModel

C_SAT_006 = 7.37511161317851412   # mpmath, Γ = 0.006, σ² = 0.01
C_SAT_017 = 2.77058013091044887   # mpmath, Γ = 0.17, σ² = 0.01


def _op(cfg, snr0=100.0, gamma=0.006, **kw):
    gain = gain_breakdown(cfg, HardwareProfile(amp_err_rms=0.1, point_err_rad=1e-4))
    return LinkOperatingPoint(snr0=snr0, gain=gain, budget=DistortionBudget(0, 0, 0, 0, gamma), **kw)


def test_c_sat_values():
    assert c_sat(0.006, 0.01) == pytest.approx(C_SAT_006, rel=1e-13)
    assert c_sat(DistortionBudget(0.17, 0, 0, 0), 0.01) == pytest.approx(C_SAT_017, rel=1e-13)
    with pytest.raises(ZeroDistortion):
        c_sat(0.0, 0.01)


def test_c_exact_against_mpmath(baseline_array):
    op = _op(baseline_array, snr0=10 ** -0.5, sigma_phi_res=0.01, sigma_dse_phase=0.2)
    g = op.gain
    rate = baseline_array.aperture_wavelengths * 0.5 / baseline_array.carrier_hz
    half = baseline_array.bandwidth_hz / 2

    def integrand(f):
        x = mp.pi * rate * f
        eta = 1 if f == 0 else (mp.sin(x) / x) ** 4
        gf = g.g_ideal * g.rho_static * eta
        return mp.log(1 + op.snr0 * gf * mp.exp(-0.01) / (1 + op.snr0 * gf * 0.006 + 0.2), 2)

    nulls = [k / rate for k in range(1, int(half * rate) + 1)]
    ref = 2 * mp.quad(integrand, [0, *nulls, half]) / baseline_array.bandwidth_hz
    assert c_exact(op, baseline_array) == pytest.approx(float(ref), rel=1e-7)


def test_saturation_limit(baseline_array):
    op = _op(baseline_array, snr0=1e12, sigma_phi_res=0.01)
    assert c_jensen(op) == pytest.approx(C_SAT_006, rel=1e-6)


def test_sinr_at_band_centre(baseline_array):
    op = _op(baseline_array, snr0=2.0)
    g = op.gain.g_ideal * op.gain.rho_static
    assert sinr_at(0.0, op, baseline_array) == pytest.approx(2 * g / (1 + 2 * g * 0.006))
    vec = sinr_at(np.array([0.0, 1e9]), op, baseline_array)
    assert vec.shape == (2,) and vec[1] < vec[0]


def test_snr_crit_modes(baseline_array):
    op = _op(baseline_array)
    b = op.budget
    assert snr_crit(op.gain, b, "uncorrelated") == pytest.approx(1 / (op.gain.g_sig_avg * 0.006))
    assert snr_crit(op.gain, b, "directional") == pytest.approx(1 / (op.gain.per_element * 0.006))
    assert knee_snr(op.gain, b) == snr_crit(op.gain, b, "uncorrelated")
    with pytest.raises(ValueError):
        snr_crit(op.gain, b, "other")


def test_uncorrelated_mode_distortion_is_weaker(baseline_array):
    op = _op(baseline_array, snr0=1e3)
    unc = replace(op, distortion_mode="uncorrelated")
    assert effective_sinr(unc) > effective_sinr(op)


def test_taylor_gap_tracks_exact_gap_for_small_squint():
    # thermal-limited, so the effective SINR is the band-mean SINR
    cfg = ArrayConfig.from_aperture(8.0, 0.05, math.radians(30.0), 140e9)
    op = _op(cfg, snr0=1e-3, gamma=1e-9)
    gap = c_jensen(op) - c_exact(op, cfg)
    assert gap > 0
    assert jensen_gap_taylor(op, cfg) == pytest.approx(gap, rel=0.05)


def test_rsm_lowers_capacity(baseline_array):
    op = _op(baseline_array, snr0=10.0)
    noisy = replace(op, rsm=RsmModel(1e9, 1e-3, 1e6).filling(baseline_array.bandwidth_hz))
    assert c_exact(noisy, baseline_array) < c_exact(op, baseline_array)
    assert c_jensen(noisy) < c_jensen(op)


def test_sweep_columns(baseline_array):
    rows = snr_sweep(_op(baseline_array, sigma_phi_res=0.01), baseline_array, [-10.0, 0.0, 40.0])
    assert list(rows[0]) == ["snr0_db", "c_exact", "c_jensen", "gap", "c_sat", "snr_crit_db"]
    assert [r["c_exact"] for r in rows] == sorted(r["c_exact"] for r in rows)


def test_operating_point_validation(baseline_array):
    with pytest.raises(ValueError):
        _op(baseline_array, snr0=0.0)
    with pytest.raises(ValueError):
        _op(baseline_array, distortion_mode="bogus")


@given(l_ap=st.floats(1.0, 64.0), bf=st.floats(0.01, 0.2), theta=st.floats(0.0, 1.3),
       snr_db=st.floats(-30.0, 50.0), gamma=st.floats(1e-4, 0.3), pn=st.floats(0.0, 0.5),
       dse=st.floats(0.0, 2.0), mode=st.sampled_from(["directional", "uncorrelated"]))
def test_jensen_upper_bound(l_ap, bf, theta, snr_db, gamma, pn, dse, mode):
    cfg = ArrayConfig.from_aperture(l_ap, bf, theta, 140e9, n=16)
    op = _op(cfg, snr0=10 ** (snr_db / 10), gamma=gamma, sigma_phi_res=pn, sigma_dse_phase=dse,
             distortion_mode=mode)
    assert c_jensen(op) >= c_exact(op, cfg) - 1e-9


@given(st.floats(-20.0, 40.0), st.floats(0.1, 10.0))
def test_capacity_monotone_in_snr(snr_db, step_db):
    cfg = ArrayConfig.from_aperture(32.0, 0.1, 0.5, 140e9)
    lo, hi = (_op(cfg, snr0=10 ** (s / 10)) for s in (snr_db, snr_db + step_db))
    assert c_exact(hi, cfg) >= c_exact(lo, cfg)
    assert c_jensen(hi) >= c_jensen(lo)
