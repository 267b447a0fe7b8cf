"""Additive noise PSDs for the communication and sensing conventions.

Both conventions share one set of inputs. The sensing PSD adds the tracked
residual phase noise as an additive term; the communication PSD omits it,
because there the same variance appears as the multiplicative e^{-σ²} loss.

Bin values on a :class:`SpectralGrid` are exact cell averages (integral over the
bin divided by its width), obtained from closed-form antiderivatives, so a bin
sum times Δf reproduces the band integral of every component.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Literal, Mapping

import numpy as np
from scipy import integrate
from scipy.special import erf

from .core_model import HardwareProfile
from .errors import ConventionMismatch, NonPositivePsd

Convention = Literal["comm", "sense"]


@dataclass(frozen=True)
class SpectralGrid:
    """N bins of width B/N centred on -B/2 + (k + 1/2)Δf."""

    n_bins: int
    bandwidth_hz: float

    def __post_init__(self):
        if int(self.n_bins) != self.n_bins or self.n_bins < 2:
            raise ValueError("n_bins must be an integer >= 2")
        if not self.bandwidth_hz > 0:
            raise ValueError("bandwidth_hz must be > 0")

    @property
    def bin_spacing_hz(self) -> float:
        return self.bandwidth_hz / self.n_bins

    @property
    def sample_period_s(self) -> float:
        return 1.0 / self.bandwidth_hz

    @property
    def freqs(self) -> np.ndarray:
        return -0.5 * self.bandwidth_hz + (np.arange(self.n_bins) + 0.5) * self.bin_spacing_hz

    @property
    def edges(self) -> np.ndarray:
        return -0.5 * self.bandwidth_hz + np.arange(self.n_bins + 1) * self.bin_spacing_hz


def parseval_residual(x) -> float:
    """Relative mismatch of Σ|x[n]|² against N⁻¹Σ|X[k]|² for the unnormalized DFT."""
    x = np.asarray(x)
    lhs = float(np.sum(np.abs(x) ** 2))
    rhs = float(np.sum(np.abs(np.fft.fft(x)) ** 2)) / x.size
    return abs(lhs - rhs) / max(lhs, np.finfo(float).tiny)


# ---------------------------------------------------------------- distortion budget

def gamma_adc(bits: int) -> float:
    if bits < 1:
        raise ValueError("bits must be >= 1")
    return 10.0 ** (-(6.02 * bits + 1.76) / 10.0)


def gamma_lo(jitter_s: float, f_eff_hz: float) -> float:
    if jitter_s < 0 or f_eff_hz < 0:
        raise ValueError("jitter and f_eff must be non-negative")
    return (2.0 * math.pi * f_eff_hz * jitter_s) ** 2


def gamma_iq(irr_db: float) -> float:
    if not irr_db > 0:
        raise ValueError("irr_db must be > 0")
    return 10.0 ** (-irr_db / 10.0)


@dataclass(frozen=True)
class DistortionBudget:
    """Hardware distortion-to-signal power ratios.

    ``gamma_total`` is the component sum unless ``gamma_override`` is set, in which
    case the override is reported as the total and the components are kept for
    the contribution report only.
    """

    gamma_pa: float
    gamma_adc: float
    gamma_iq: float
    gamma_lo: float
    gamma_override: float | None = None

    def __post_init__(self):
        for name in ("gamma_pa", "gamma_adc", "gamma_iq", "gamma_lo"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.gamma_override is not None and self.gamma_override < 0:
            raise ValueError("gamma_override must be non-negative")

    @property
    def gamma_sum(self) -> float:
        return self.gamma_pa + self.gamma_adc + self.gamma_iq + self.gamma_lo

    @property
    def gamma_total(self) -> float:
        return self.gamma_sum if self.gamma_override is None else float(self.gamma_override)

    def fractions(self) -> dict[str, float]:
        """Share of each component in the component sum."""
        s = self.gamma_sum
        parts = {"pa": self.gamma_pa, "adc": self.gamma_adc, "iq": self.gamma_iq, "lo": self.gamma_lo}
        return {k: (v / s if s > 0 else 0.0) for k, v in parts.items()}


def distortion_budget(hw: HardwareProfile, f_eff_hz: float,
                      gamma_total_override: float | None = None) -> DistortionBudget:
    return DistortionBudget(gamma_pa=hw.gamma_pa, gamma_adc=gamma_adc(hw.adc_bits),
                            gamma_iq=gamma_iq(hw.irr_db), gamma_lo=gamma_lo(hw.jitter_s, f_eff_hz),
                            gamma_override=gamma_total_override)


def sigma_gamma_psd(p_sig_w: float, g_sig_avg: float, gamma_total: float, bandwidth_hz: float) -> float:
    """Flat distortion PSD P·G_sig,avg·Γ/B."""
    return p_sig_w * g_sig_avg * gamma_total / bandwidth_hz


# ---------------------------------------------------------------- residual phase noise

@dataclass(frozen=True)
class PhaseNoiseModel:
    """Free-running PSD k2/f² + k3/|f|³ + floor seen through a first-order tracking loop.

    The f⁻³ term is not integrable at DC even after the loop high-pass (the
    product still behaves like 1/|f|), so it is flattened below
    ``flicker_corner_hz``: |f| is replaced by max(|f|, f_corner) in that term.
    """

    k2: float = 0.0
    k3: float = 0.0
    floor: float = 0.0
    loop_bw_hz: float = 10e6
    flicker_corner_hz: float = 1e3
    psd_kind: Literal["power_law"] = "power_law"

    def __post_init__(self):
        if min(self.k2, self.k3, self.floor) < 0:
            raise ValueError("phase-noise coefficients must be non-negative")
        if not self.loop_bw_hz > 0 or not self.flicker_corner_hz > 0:
            raise ValueError("loop_bw_hz and flicker_corner_hz must be > 0")
        if self.psd_kind != "power_law":
            raise ValueError(f"unsupported psd_kind {self.psd_kind!r}")

    def scaled(self, factor: float) -> "PhaseNoiseModel":
        return replace(self, k2=self.k2 * factor, k3=self.k3 * factor, floor=self.floor * factor)

    @classmethod
    def calibrated(cls, target_var: float = 0.01, bandwidth_hz: float = 20e9,
                   loop_bw_hz: float = 10e6, floor_share: float = 0.05,
                   flicker_share: float = 0.0, flicker_corner_hz: float = 1e3) -> "PhaseNoiseModel":
        """Split ``target_var`` across the three terms so the in-band residual hits it exactly."""
        if not 0 <= floor_share + flicker_share <= 1:
            raise ValueError("shares must sum to at most 1")
        half = 0.5 * bandwidth_hz
        unit = {name: cls(**{name: 1.0}, loop_bw_hz=loop_bw_hz,
                          flicker_corner_hz=flicker_corner_hz)
                for name in ("k2", "k3", "floor")}
        shares = {"k2": 1.0 - floor_share - flicker_share, "k3": flicker_share, "floor": floor_share}
        coeffs = {}
        for name, share in shares.items():
            unit_var = 2.0 * float(_s_res_antiderivative(half, unit[name]))
            coeffs[name] = share * target_var / unit_var if share > 0 else 0.0
        return cls(**coeffs, loop_bw_hz=loop_bw_hz, flicker_corner_hz=flicker_corner_hz)


def s_phi_res(f_hz, model: PhaseNoiseModel):
    """Residual (tracked) phase-noise PSD in rad²/Hz."""
    f = np.abs(np.asarray(f_hz, dtype=float))
    bl2 = model.loop_bw_hz**2
    hp = f**2 / (bl2 + f**2)
    out = model.k2 / (bl2 + f**2) + model.floor * hp
    if model.k3:
        out = out + model.k3 * hp / np.maximum(f, model.flicker_corner_hz) ** 3
    return out if out.ndim else float(out)


def _hp_integral(x, bl: float):
    """∫₀ˣ u²/(B_L²+u²) du = B_L·(t - atan t) with t = x/B_L, by series where that cancels."""
    t = np.asarray(x, dtype=float) / bl
    small = t < 0.1
    ts = np.where(small, t, 0.0)
    series = ts**3 * (1/3 - ts**2 * (1/5 - ts**2 * (1/7 - ts**2 * (1/9 - ts**2 * (1/11 - ts**2 / 13)))))
    return bl * np.where(small, series, t - np.arctan(t))


def _s_res_antiderivative(f_hz, model: PhaseNoiseModel):
    """Odd antiderivative of :func:`s_phi_res` with value 0 at f = 0."""
    f = np.asarray(f_hz, dtype=float)
    a = np.abs(f)
    bl = model.loop_bw_hz
    out = model.k2 / bl * np.arctan(a / bl) + model.floor * _hp_integral(a, bl)
    if model.k3:
        fc = model.flicker_corner_hz
        inner = model.k3 / fc**3 * _hp_integral(np.minimum(a, fc), bl)
        log_term = lambda x: np.log(x**2 / (bl**2 + x**2))
        outer = model.k3 / (2 * bl**2) * (log_term(np.maximum(a, fc)) - log_term(fc))
        out = out + inner + outer
    return np.sign(f) * out


def sigma_phi_res_var(model: PhaseNoiseModel, grid: SpectralGrid) -> float:
    """In-band residual variance ∫ S_φ,res df over [-B/2, B/2] by adaptive quadrature."""
    half = 0.5 * grid.bandwidth_hz
    # The integrand is even and varies on the scales of the corner and loop bandwidth,
    # so split [0, B/2] on a decade ladder starting at the flicker corner.
    knots = [0.0]
    x = min(model.flicker_corner_hz, model.loop_bw_hz)
    while x < half:
        knots.append(x)
        x *= 10.0
    knots.append(half)
    total = 0.0
    for lo, hi in zip(knots[:-1], knots[1:]):
        val, _ = integrate.quad(s_phi_res, lo, hi, args=(model,), epsabs=0.0, epsrel=1e-11, limit=200)
        total += val
    return 2.0 * total


# ---------------------------------------------------------------- RSM surrogate

@dataclass(frozen=True)
class RsmModel:
    """Comb of Gaussian lines at ±k·symbol_rate carrying ``total_power_ratio`` of the signal power."""

    symbol_rate_hz: float = 1e9
    total_power_ratio: float = 0.0
    line_width_hz: float = 1e6
    n_harmonics: int = 0

    def __post_init__(self):
        if not self.symbol_rate_hz > 0 or not self.line_width_hz > 0:
            raise ValueError("symbol_rate_hz and line_width_hz must be > 0")
        if self.total_power_ratio < 0:
            raise ValueError("total_power_ratio must be non-negative")
        if int(self.n_harmonics) != self.n_harmonics or self.n_harmonics < 0:
            raise ValueError("n_harmonics must be a non-negative integer")

    @property
    def enabled(self) -> bool:
        return self.n_harmonics > 0 and self.total_power_ratio > 0

    def centers(self) -> np.ndarray:
        k = np.arange(1, self.n_harmonics + 1) * self.symbol_rate_hz
        return np.concatenate((-k[::-1], k))

    def filling(self, bandwidth_hz: float) -> "RsmModel":
        """Same comb with every harmonic that fits inside the band switched on."""
        return replace(self, n_harmonics=int(0.5 * bandwidth_hz // self.symbol_rate_hz))


def _gauss_cdf(x):
    return 0.5 * (1.0 + erf(np.asarray(x) / math.sqrt(2.0)))


def _rsm_line_scale(model: RsmModel, p_sig_ref: float, bandwidth_hz: float) -> float:
    # Power per unit of line mass so that the in-band integral hits the target exactly.
    c = model.centers()
    half = 0.5 * bandwidth_hz
    w = model.line_width_hz
    mass = np.sum(_gauss_cdf((half - c) / w) - _gauss_cdf((-half - c) / w))
    return model.total_power_ratio * p_sig_ref / mass if mass > 0 else 0.0


def s_rsm(f_offset_hz, model: RsmModel, p_sig_ref: float, bandwidth_hz: float):
    """RSM PSD in W/Hz; integrates to total_power_ratio·p_sig_ref over the band."""
    f = np.asarray(f_offset_hz, dtype=float)
    if not model.enabled:
        return np.zeros_like(f) if f.ndim else 0.0
    scale = _rsm_line_scale(model, p_sig_ref, bandwidth_hz)
    w = model.line_width_hz
    z = (f[..., None] - model.centers()) / w
    out = scale * np.sum(np.exp(-0.5 * z**2), axis=-1) / (math.sqrt(2 * math.pi) * w)
    return out if out.ndim else float(out)


def _rsm_cell_average(edges: np.ndarray, model: RsmModel, p_sig_ref: float, bandwidth_hz: float):
    if not model.enabled:
        return np.zeros(edges.size - 1)
    scale = _rsm_line_scale(model, p_sig_ref, bandwidth_hz)
    cdf = np.sum(_gauss_cdf((edges[:, None] - model.centers()) / model.line_width_hz), axis=1)
    return scale * np.diff(cdf) / np.diff(edges)


# ---------------------------------------------------------------- assembled PSDs

@dataclass(frozen=True)
class NoiseInputs:
    """Everything needed to evaluate N_comm(f) or N_sense(f) at arbitrary f.

    ``sigma_gamma_psd`` and ``sigma_dse_psd`` are flat densities in W/Hz; the
    phase-noise term is scaled by ``p_sig_ref`` (received signal power) to turn
    rad²/Hz into W/Hz.
    """

    n0: float
    bandwidth_hz: float
    sigma_gamma_psd: float = 0.0
    sigma_dse_psd: float = 0.0
    rsm: RsmModel = field(default_factory=RsmModel)
    phase_noise: PhaseNoiseModel = field(default_factory=PhaseNoiseModel)
    p_sig_ref: float = 1.0

    def __post_init__(self):
        if self.n0 < 0 or self.sigma_gamma_psd < 0 or self.sigma_dse_psd < 0 or self.p_sig_ref < 0:
            raise ValueError("PSD contributions must be non-negative")
        if not self.bandwidth_hz > 0:
            raise ValueError("bandwidth_hz must be > 0")

    def density(self, f_hz, convention: Convention):
        """Continuous PSD value at ``f_hz``."""
        f = np.asarray(f_hz, dtype=float)
        out = (self.n0 + self.sigma_gamma_psd + self.sigma_dse_psd
               + s_rsm(f, self.rsm, self.p_sig_ref, self.bandwidth_hz) + np.zeros_like(f))
        if convention == "sense":
            out = out + self.p_sig_ref * s_phi_res(f, self.phase_noise)
        elif convention != "comm":
            raise ValueError(f"unknown convention {convention!r}")
        return out

    def components(self, edges: np.ndarray) -> dict[str, np.ndarray]:
        """Cell-averaged contribution of each term on the bins bounded by ``edges``."""
        ones = np.ones(edges.size - 1)
        pn = np.diff(_s_res_antiderivative(edges, self.phase_noise)) / np.diff(edges)
        return {
            "thermal": self.n0 * ones,
            "hw_distortion": self.sigma_gamma_psd * ones,
            "dse": self.sigma_dse_psd * ones,
            "rsm": _rsm_cell_average(edges, self.rsm, self.p_sig_ref, self.bandwidth_hz),
            "phase_noise": self.p_sig_ref * pn,
        }


@dataclass(frozen=True)
class NoisePsd:
    grid: SpectralGrid
    values: np.ndarray = field(repr=False)
    convention: Convention
    inputs: NoiseInputs
    components: Mapping[str, np.ndarray] = field(repr=False, compare=False)

    def integral(self) -> float:
        return float(np.sum(self.values) * self.grid.bin_spacing_hz)

    def density(self, f_hz):
        return self.inputs.density(f_hz, self.convention)

    def require(self, convention: Convention) -> "NoisePsd":
        if self.convention != convention:
            raise ConventionMismatch(f"expected a {convention} PSD, got {self.convention}")
        return self


def build_noise_psd(convention: Convention, grid: SpectralGrid, inputs: NoiseInputs) -> NoisePsd:
    """Sample N_comm or N_sense on ``grid`` as exact bin averages."""
    if convention not in ("comm", "sense"):
        raise ValueError(f"unknown convention {convention!r}")
    if not math.isclose(grid.bandwidth_hz, inputs.bandwidth_hz, rel_tol=1e-12):
        raise ValueError("grid and noise inputs disagree on the bandwidth")
    comps = inputs.components(grid.edges)
    if convention == "comm":
        comps["phase_noise"] = np.zeros(grid.n_bins)
    values = sum(comps.values())
    if not np.all(values > 0):
        raise NonPositivePsd(f"{int(np.sum(values <= 0))} bin(s) are <= 0")
    values.setflags(write=False)
    for v in comps.values():
        v.setflags(write=False)
    return NoisePsd(grid=grid, values=values, convention=convention, inputs=inputs,
                    components=MappingProxyType(comps))
