"""Link geometry and the multiplicative gain cascade of array impairments.

Every loss factor is a pure function of immutable inputs. The band-averaged
squint loss is computed by adaptive quadrature that is split at the analytically
known nulls of the sinc⁴ pattern, so the oscillatory integrand never straddles a
zero inside one quadrature panel.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import integrate

from .errors import ModelValidityWarning, TaylorOutOfRange
from .units import SPEED_OF_LIGHT, as_scalar, sinc

TAYLOR_KAPPA_MAX = 0.5
QUAD_EPSREL = 1e-9
QUAD_EPSABS = 1e-12


@dataclass(frozen=True)
class ArrayConfig:
    """Uniform linear arrays at both ends of the link, steered to ``steer_angle_rad``."""

    n_tx: int
    n_rx: int
    spacing_wavelengths: float = 0.5
    steer_angle_rad: float = math.radians(30.0)
    carrier_hz: float = 140e9
    bandwidth_hz: float = 20e9
    range_m: float = 1.0e6

    def __post_init__(self):
        for name in ("n_tx", "n_rx"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if not self.spacing_wavelengths > 0:
            raise ValueError("spacing_wavelengths must be > 0")
        if not abs(self.steer_angle_rad) < math.pi / 2:
            raise ValueError("steer_angle_rad must lie in (-pi/2, pi/2)")
        if not self.carrier_hz > 0 or not self.bandwidth_hz > 0:
            raise ValueError("carrier_hz and bandwidth_hz must be > 0")
        if self.bandwidth_hz > self.carrier_hz:
            raise ValueError("bandwidth_hz must not exceed carrier_hz")
        if not self.range_m > 0:
            raise ValueError("range_m must be > 0")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz

    @property
    def aperture_tx_wavelengths(self) -> float:
        return self.n_tx * self.spacing_wavelengths

    @property
    def aperture_rx_wavelengths(self) -> float:
        return self.n_rx * self.spacing_wavelengths

    @property
    def aperture_wavelengths(self) -> float:
        """Active aperture L_ap/λ; the larger side when the two differ (worst-case squint)."""
        return max(self.aperture_tx_wavelengths, self.aperture_rx_wavelengths)

    @property
    def aperture_m(self) -> float:
        return self.aperture_wavelengths * self.wavelength_m

    @property
    def fractional_bandwidth(self) -> float:
        return self.bandwidth_hz / self.carrier_hz

    @property
    def far_field_distance_m(self) -> float:
        return 2.0 * self.aperture_m**2 / self.wavelength_m

    @property
    def far_field_ok(self) -> bool:
        return self.range_m >= self.far_field_distance_m

    @classmethod
    def from_aperture(cls, aperture_wavelengths: float, fractional_bandwidth: float,
                      steer_angle_rad: float = math.radians(30.0),
                      carrier_hz: float = 140e9, **kw) -> "ArrayConfig":
        """Square array (n_tx = n_rx) with the spacing chosen to hit the requested aperture."""
        n = kw.pop("n", 64)
        return cls(n_tx=n, n_rx=n, spacing_wavelengths=aperture_wavelengths / n,
                   steer_angle_rad=steer_angle_rad, carrier_hz=carrier_hz,
                   bandwidth_hz=fractional_bandwidth * carrier_hz, **kw)


@dataclass(frozen=True)
class HardwareProfile:
    """Impairment magnitudes of one transceiver pair. Ratios are linear, not dB."""

    gamma_pa: float = 0.0
    adc_bits: int = 7
    irr_db: float = 20.0
    ps_bits: int = 4
    jitter_s: float = 0.0
    amp_err_rms: float = 0.0
    point_err_rad: float = 0.0
    rel_pn_var_tx: float = 0.0
    rel_pn_var_rx: float = 0.0
    diff_jitter_s: float = 0.0
    loop_loss: float = 1.0

    def __post_init__(self):
        for name in ("gamma_pa", "jitter_s", "amp_err_rms", "point_err_rad",
                     "rel_pn_var_tx", "rel_pn_var_rx", "diff_jitter_s"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("adc_bits", "ps_bits"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer")
        if not self.irr_db > 0:
            raise ValueError("irr_db must be > 0")
        if self.loop_loss < 1:
            raise ValueError("loop_loss must be >= 1")

    @property
    def rel_pn_var(self) -> float:
        """Differential phase variance excluding the jitter term (which needs f_c)."""
        return self.rel_pn_var_tx + self.rel_pn_var_rx


@dataclass(frozen=True)
class GainBreakdown:
    g_ideal: float
    eta_bsq_avg: float
    rho_q: float
    rho_ape: float
    rho_a: float
    rho_pn: float
    g_sig_avg: float

    @property
    def rho_static(self) -> float:
        """Frequency-flat part of the cascade (everything except squint and G_ideal)."""
        return self.rho_q * self.rho_ape * self.rho_a * self.rho_pn

    @property
    def per_element(self) -> float:
        """Band-averaged gain with the array factor removed."""
        return self.eta_bsq_avg * self.rho_static


def kappa(cfg: ArrayConfig) -> float:
    """Space-bandwidth product (L_ap/λ)(B/f_c)|sin θ₀|."""
    return cfg.aperture_wavelengths * cfg.fractional_bandwidth * abs(math.sin(cfg.steer_angle_rad))


def _squint_rate(cfg: ArrayConfig) -> float:
    # argument of the sinc per unit fractional offset f/f_c, divided by π
    return cfg.aperture_wavelengths * math.sin(cfg.steer_angle_rad)


def eta_bsq(f_offset_hz, cfg: ArrayConfig):
    """Beam-squint power loss at baseband offset ``f_offset_hz`` (scalar or array)."""
    f = np.asarray(f_offset_hz, dtype=float)
    x = math.pi * _squint_rate(cfg) * f / cfg.carrier_hz
    return as_scalar(sinc(x) ** 4)


def eta_bsq_avg(cfg: ArrayConfig, method: Literal["numeric", "taylor"] = "numeric") -> float:
    """Band average of ``eta_bsq`` over [-B/2, B/2]."""
    a = abs(_squint_rate(cfg))
    if method == "taylor":
        k = kappa(cfg)
        if k > TAYLOR_KAPPA_MAX:
            raise TaylorOutOfRange(f"kappa={k:.4g} exceeds {TAYLOR_KAPPA_MAX}")
        return 1.0 - (math.pi**2 / 18.0) * k**2
    if method != "numeric":
        raise ValueError(f"unknown method {method!r}")
    if a == 0.0:
        return 1.0
    # Normalized variable u = f/B on [0, 1/2]; the integrand is even in f.
    c = math.pi * a * cfg.fractional_bandwidth
    nulls = np.arange(1, int(0.5 * c / math.pi) + 1) * math.pi / c
    edges = np.concatenate(([0.0], nulls[nulls < 0.5], [0.5]))
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(lambda u: np.sinc(c * u / np.pi) ** 4, lo, hi,
                                epsabs=QUAD_EPSABS, epsrel=QUAD_EPSREL, limit=200)
        total += val
    return 2.0 * total


def rho_q(ps_bits: int) -> float:
    """Phase-shifter quantization loss sinc²(π/2^b)."""
    if ps_bits < 1:
        raise ValueError("ps_bits must be >= 1")
    return float(sinc(math.pi / 2.0**ps_bits) ** 2)


def rho_ape(cfg: ArrayConfig, point_err_rad: float) -> float:
    """Pointing-jitter loss exp(-(π²/3)(L_ap cos θ₀/λ)² σ_θ²)."""
    if point_err_rad < 0:
        raise ValueError("point_err_rad must be non-negative")
    l_eff = cfg.aperture_wavelengths * math.cos(cfg.steer_angle_rad)
    return math.exp(-(math.pi**2 / 3.0) * l_eff**2 * point_err_rad**2)


def rho_a(amp_err_rms: float) -> float:
    """Element amplitude-error loss e^{-σ_a²}."""
    if amp_err_rms < 0:
        raise ValueError("amp_err_rms must be non-negative")
    if amp_err_rms > 0.3:
        warnings.warn(f"amp_err_rms={amp_err_rms} is outside the small-error regime",
                      ModelValidityWarning, stacklevel=2)
    return math.exp(-amp_err_rms**2)


def rel_phase_var(profile: HardwareProfile, carrier_hz: float) -> float:
    """σ_rel² = σ²_tx + σ²_rx + (2π f_c σ_t,diff)²."""
    return profile.rel_pn_var + (2.0 * math.pi * carrier_hz * profile.diff_jitter_s) ** 2


def rho_pn(profile: HardwareProfile, carrier_hz: float) -> float:
    """Coherent power factor of differential element phase noise, e^{-σ_rel²}."""
    return math.exp(-rel_phase_var(profile, carrier_hz))


def gain_breakdown(cfg: ArrayConfig, hw: HardwareProfile) -> GainBreakdown:
    g_ideal = float(cfg.n_tx * cfg.n_rx)
    eta = eta_bsq_avg(cfg, "numeric")
    rq = rho_q(hw.ps_bits)
    rape = rho_ape(cfg, hw.point_err_rad)
    ra = rho_a(hw.amp_err_rms)
    rpn = rho_pn(hw, cfg.carrier_hz)
    return GainBreakdown(g_ideal=g_ideal, eta_bsq_avg=eta, rho_q=rq, rho_ape=rape,
                         rho_a=ra, rho_pn=rpn,
                         g_sig_avg=g_ideal * eta * rq * rape * ra * rpn)


def amplitude_profile(f_offset_hz, cfg: ArrayConfig, hw: HardwareProfile):
    """Frequency-resolved sensing amplitude √(G_ideal·ρ_static·η_bsq(f)).

    The tracked-phase coherence loss is deliberately absent: on the sensing side
    that phase noise is carried as additive noise instead.
    """
    rho_static = (rho_q(hw.ps_bits) * rho_ape(cfg, hw.point_err_rad)
                  * rho_a(hw.amp_err_rms) * rho_pn(hw, cfg.carrier_hz))
    g = cfg.n_tx * cfg.n_rx * rho_static * np.asarray(eta_bsq(f_offset_hz, cfg))
    return as_scalar(np.sqrt(g))


def path_loss(cfg: ArrayConfig) -> float:
    """Free-space loss (4πR/λ)² as a linear ratio ≥ 1 in the far field."""
    return (4.0 * math.pi * cfg.range_m / cfg.wavelength_m) ** 2
