"""Frequency-resolved SINR and the capacity surrogates built on it.

"Capacity" here is the Gaussian-input spectral efficiency under the
effective-SINR model, a surrogate rather than a Shannon capacity of the
distorted channel. All spectral efficiencies are in bits/s/Hz; multiply by B for
a data rate.

Units: SNR₀ = P/(N₀B) is linear, every noise-like term inside the SINR
denominator is normalized by N₀.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np
from scipy import integrate

from .core_model import ArrayConfig, GainBreakdown, eta_bsq
from .errors import ZeroDistortion
from .noise_spectra import DistortionBudget, RsmModel, s_rsm

DistortionMode = Literal["uncorrelated", "directional"]
QUAD_EPSREL = 1e-8
QUAD_EPSABS = 1e-13  # per unit bandwidth; panels deep in the squint nulls are ~0


@dataclass(frozen=True)
class LinkOperatingPoint:
    snr0: float
    gain: GainBreakdown
    budget: DistortionBudget
    sigma_phi_res: float = 0.0
    sigma_dse_phase: float = 0.0
    rsm: RsmModel = field(default_factory=RsmModel)
    distortion_mode: DistortionMode = "directional"

    def __post_init__(self):
        if not self.snr0 > 0:
            raise ValueError("snr0 must be > 0")
        if self.sigma_phi_res < 0 or self.sigma_dse_phase < 0:
            raise ValueError("variance terms must be non-negative")
        if self.distortion_mode not in ("uncorrelated", "directional"):
            raise ValueError(f"unknown distortion_mode {self.distortion_mode!r}")

    def with_snr0(self, snr0: float) -> "LinkOperatingPoint":
        return replace(self, snr0=snr0)

    @property
    def rx_snr(self) -> float:
        """Band-averaged received SNR, SNR₀·G_sig,avg (the RSM reference power over N₀B)."""
        return self.snr0 * self.gain.g_sig_avg


@dataclass(frozen=True)
class CapacityResult:
    c_exact: float
    c_jensen: float
    jensen_gap: float
    c_sat: float
    snr_crit: float


def _distortion_gain(g_f, op: LinkOperatingPoint):
    # Gain that multiplies SNR₀·Γ in the denominator.
    if op.distortion_mode == "directional":
        return g_f
    return g_f / op.gain.g_ideal


def _rsm_over_n0(f, op: LinkOperatingPoint, cfg: ArrayConfig):
    # RSM leaks a fraction of the received signal power P_rx = SNR₀·G_sig,avg·N₀·B.
    return s_rsm(f, op.rsm, op.rx_snr * cfg.bandwidth_hz, cfg.bandwidth_hz)


def sinr_at(f_offset_hz, op: LinkOperatingPoint, cfg: ArrayConfig):
    """SINR(f) = SNR₀·G(f)·e^{-σ²} / (1 + SNR₀·G_d(f)·Γ + σ²_DSE/N₀ + S_RSM(f)/N₀)."""
    g_f = op.gain.g_ideal * op.gain.rho_static * np.asarray(eta_bsq(f_offset_hz, cfg))
    num = op.snr0 * g_f * math.exp(-op.sigma_phi_res)
    den = (1.0 + op.snr0 * _distortion_gain(g_f, op) * op.budget.gamma_total
           + op.sigma_dse_phase + _rsm_over_n0(f_offset_hz, op, cfg))
    out = num / den
    return out if np.ndim(out) else float(out)


def _band_breakpoints(op: LinkOperatingPoint, cfg: ArrayConfig) -> np.ndarray:
    """Breakpoints on [0, B/2]: squint nulls plus the flanks of every RSM line."""
    half = 0.5 * cfg.bandwidth_hz
    pts = [0.0, half]
    a = abs(cfg.aperture_wavelengths * math.sin(cfg.steer_angle_rad))
    if a > 0 and cfg.carrier_hz / a < half:
        step = cfg.carrier_hz / a
        pts.extend(np.arange(step, half, step))
    if op.rsm.enabled:
        for c in op.rsm.centers():
            if c > 0:
                pts.extend(c + op.rsm.line_width_hz * np.array([-6.0, -2.0, 0.0, 2.0, 6.0]))
    pts = np.unique(np.clip(pts, 0.0, half))
    return pts


def _band_average(fun, op: LinkOperatingPoint, cfg: ArrayConfig) -> float:
    """B⁻¹∫ fun(f) df for an even integrand, by adaptive quadrature between breakpoints."""
    pts = _band_breakpoints(op, cfg)
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        val, _ = integrate.quad(fun, lo, hi, epsabs=QUAD_EPSABS * cfg.bandwidth_hz,
                                epsrel=QUAD_EPSREL, limit=200)
        total += val
    return 2.0 * total / cfg.bandwidth_hz


def c_exact(op: LinkOperatingPoint, cfg: ArrayConfig) -> float:
    return _band_average(lambda f: math.log2(1.0 + sinr_at(f, op, cfg)), op, cfg)


def effective_sinr(op: LinkOperatingPoint) -> float:
    """Band-averaged SINR: every term is averaged over the band before forming the ratio."""
    g = op.gain
    g_dist = g.g_sig_avg if op.distortion_mode == "directional" else g.per_element
    rsm_avg = op.rsm.total_power_ratio * op.rx_snr if op.rsm.enabled else 0.0
    num = op.snr0 * g.g_sig_avg * math.exp(-op.sigma_phi_res)
    return num / (1.0 + op.snr0 * g_dist * op.budget.gamma_total + op.sigma_dse_phase + rsm_avg)


def c_jensen(op: LinkOperatingPoint, cfg: ArrayConfig | None = None) -> float:
    return math.log2(1.0 + effective_sinr(op))


def jensen_gap_taylor(op: LinkOperatingPoint, cfg: ArrayConfig) -> float:
    """Second-order estimate Var_f[SINR]/(2(1+E_f[SINR])² ln 2). Qualitative use only."""
    mean = _band_average(lambda f: sinr_at(f, op, cfg), op, cfg)
    second = _band_average(lambda f: sinr_at(f, op, cfg) ** 2, op, cfg)
    var = max(second - mean**2, 0.0)
    return taylor_gap_from_moments(mean, var)


def taylor_gap_from_moments(mean: float, var: float) -> float:
    return var / (2.0 * (1.0 + mean) ** 2 * math.log(2.0))


def c_sat(budget: DistortionBudget | float, sigma_phi_res: float) -> float:
    """SNR-independent ceiling log₂(1 + e^{-σ²}/Γ)."""
    gamma = budget.gamma_total if isinstance(budget, DistortionBudget) else float(budget)
    if gamma <= 0:
        raise ZeroDistortion("gamma_total = 0 gives an unbounded ceiling")
    return math.log2(1.0 + math.exp(-sigma_phi_res) / gamma)


def snr_crit(gain: GainBreakdown, budget: DistortionBudget,
             mode: DistortionMode = "directional") -> float:
    """SNR₀ at which distortion power equals thermal noise.

    Uncorrelated mode returns 1/(G_sig,avg·Γ). Directional mode removes the array
    factor, 1/(ρ_static·η̄·Γ), which is invariant in N_t, N_r.
    """
    gamma = budget.gamma_total
    if gamma <= 0:
        raise ZeroDistortion("gamma_total = 0 has no critical SNR")
    if mode == "uncorrelated":
        return 1.0 / (gain.g_sig_avg * gamma)
    if mode == "directional":
        return 1.0 / (gain.per_element * gamma)
    raise ValueError(f"unknown mode {mode!r}")


def knee_snr(gain: GainBreakdown, budget: DistortionBudget) -> float:
    """SNR₀ where the band-averaged distortion term SNR₀·G_sig,avg·Γ reaches 1."""
    return 1.0 / (gain.g_sig_avg * budget.gamma_total)


def evaluate(op: LinkOperatingPoint, cfg: ArrayConfig) -> CapacityResult:
    ce = c_exact(op, cfg)
    cj = c_jensen(op)
    gamma = op.budget.gamma_total
    return CapacityResult(
        c_exact=ce, c_jensen=cj, jensen_gap=cj - ce,
        c_sat=c_sat(op.budget, op.sigma_phi_res) if gamma > 0 else math.inf,
        snr_crit=snr_crit(op.gain, op.budget, op.distortion_mode) if gamma > 0 else math.inf,
    )


def snr_sweep(op: LinkOperatingPoint, cfg: ArrayConfig, snr0_db) -> list[dict]:
    """Rows with columns snr0_db, c_exact, c_jensen, gap, c_sat, snr_crit_db."""
    rows = []
    for s_db in np.asarray(snr0_db, dtype=float):
        r = evaluate(op.with_snr0(10.0 ** (s_db / 10.0)), cfg)
        rows.append({"snr0_db": float(s_db), "c_exact": r.c_exact, "c_jensen": r.c_jensen,
                     "gap": r.jensen_gap, "c_sat": r.c_sat,
                     "snr_crit_db": 10.0 * math.log10(r.snr_crit)})
    return rows
