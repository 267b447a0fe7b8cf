"""Delay Fisher information under colored Gaussian noise.

Two interfaces compute the same quantity:

* ``whittle_fim_tau``: frequency-domain bin sum 2Σ|∂S_k/∂τ|²/N_k·Δf, which treats
  the bins as independent.
* ``exact_time_fim``: time-domain samples with the full Toeplitz noise
  covariance, solved through a Cholesky factorization. By default the
  covariance lags are computed from the continuous PSD on an oversampled grid.
  With ``oversample=1`` they come from the bin values alone, which yields a
  circulant matrix and reproduces the Whittle number up to rounding.

Range conversions use the cooperative two-way time-transfer factor c/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .core_model import ArrayConfig, HardwareProfile, amplitude_profile
from .errors import CovarianceNotPD, SingularFim
from .noise_spectra import NoisePsd, SpectralGrid
from .units import SPEED_OF_LIGHT

MAX_EXACT_BINS = 8192


def chirp_phase(n_bins: int) -> np.ndarray:
    """Quadratic spectral phase πk²/N, which spreads the pulse over the whole record."""
    k = np.arange(n_bins)
    return np.pi * k.astype(float) ** 2 / n_bins


@dataclass(frozen=True)
class SensingSignalSpec:
    grid: SpectralGrid
    amplitude: np.ndarray = field(repr=False)
    tau_s: float = 0.0
    doppler_hz: float = 0.0
    phase: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        amp = np.asarray(self.amplitude, dtype=float)
        if amp.shape != (self.grid.n_bins,):
            raise ValueError("amplitude must have one entry per bin")
        if np.any(amp < 0):
            raise ValueError("amplitude must be non-negative")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitude", amp)
        ph = chirp_phase(self.grid.n_bins) if self.phase is None else np.asarray(self.phase, float)
        ph.setflags(write=False)
        object.__setattr__(self, "phase", ph)

    @property
    def energy(self) -> float:
        """E = Σ|S_k|²·Δf."""
        return float(np.sum(self.amplitude**2) * self.grid.bin_spacing_hz)

    def spectrum(self) -> np.ndarray:
        """Complex S_k = A_k·e^{jψ_k}·e^{-j2πf_kτ}."""
        f = self.grid.freqs
        return self.amplitude * np.exp(1j * (self.phase - 2 * np.pi * f * self.tau_s))

    def d_spectrum_d_tau(self) -> np.ndarray:
        return -2j * np.pi * self.grid.freqs * self.spectrum()


def flat_signal(grid: SpectralGrid, energy: float, **kw) -> SensingSignalSpec:
    """|S(f)|² = E/B across the band."""
    amp = np.full(grid.n_bins, math.sqrt(energy / grid.bandwidth_hz))
    return SensingSignalSpec(grid=grid, amplitude=amp, **kw)


def array_signal(grid: SpectralGrid, cfg: ArrayConfig, hw: HardwareProfile,
                 energy_ref: float, **kw) -> SensingSignalSpec:
    """|S(f)|² = (E_ref/B)·G_ideal·ρ_static·η_bsq(f): a reference energy shaped by the array."""
    amp = math.sqrt(energy_ref / grid.bandwidth_hz) * np.asarray(amplitude_profile(grid.freqs, cfg, hw))
    return SensingSignalSpec(grid=grid, amplitude=amp, **kw)


@dataclass(frozen=True)
class FimResult:
    j_tau_tau: float
    crb_tau: float
    rmse_range_m: float
    method: str
    fim_2x2: np.ndarray | None = field(default=None, repr=False)


def rmse_range(crb_tau: float) -> float:
    """(c/2)·√CRB_τ in metres."""
    if crb_tau < 0:
        raise ValueError("crb_tau must be non-negative")
    return 0.5 * SPEED_OF_LIGHT * math.sqrt(crb_tau)


def _result(j: float, method: str, fim=None) -> FimResult:
    crb = 1.0 / j if j > 0 else math.inf
    return FimResult(j_tau_tau=j, crb_tau=crb, rmse_range_m=rmse_range(crb), method=method, fim_2x2=fim)


def whittle_fim_tau(sig: SensingSignalSpec, noise: NoisePsd) -> FimResult:
    noise.require("sense")
    if noise.grid != sig.grid:
        raise ValueError("signal and noise grids differ")
    ds2 = (2 * np.pi * sig.grid.freqs) ** 2 * sig.amplitude**2
    j = 2.0 * float(np.sum(ds2 / noise.values)) * sig.grid.bin_spacing_hz
    return _result(j, "whittle")


def fim_awgn_closed(energy: float, n0: float, bandwidth_hz: float) -> float:
    """J_ττ = 2π²EB²/(3N₀) for a flat spectrum in white noise."""
    if energy < 0 or not n0 > 0 or not bandwidth_hz > 0:
        raise ValueError("need energy >= 0 and positive n0, bandwidth")
    return 2.0 * math.pi**2 * energy * bandwidth_hz**2 / (3.0 * n0)


def rmse_awgn(energy: float, n0: float, bandwidth_hz: float) -> float:
    return rmse_range(1.0 / fim_awgn_closed(energy, n0, bandwidth_hz))


def weighted_moment(sig: SensingSignalSpec, noise: NoisePsd) -> float:
    """M₂ = ∫ f²·W(f)/N(f) df with W = |S|²/(E/B), as a bin sum."""
    w = sig.amplitude**2 / (sig.energy / sig.grid.bandwidth_hz)
    return float(np.sum(sig.grid.freqs**2 * w / noise.values) * sig.grid.bin_spacing_hz)


def bcrlb(sig: SensingSignalSpec, noise: NoisePsd, prior_precision=None, data_fim=None) -> float:
    """Range-domain bound in m².

    Without a prior this is (c²/32π²)(B/E)/M₂. A prior is given as a precision
    (inverse covariance) over range in 1/m², either scalar or 2×2 over
    (range, Doppler); it is added to the data information before inversion. A
    2×2 prior needs a 2×2 ``data_fim`` (τ, f_D units) from the exact path,
    otherwise the Doppler row carries prior information only.
    """
    noise.require("sense")
    if not sig.energy > 0:
        raise SingularFim("signal energy is zero")
    m2 = weighted_moment(sig, noise)
    if not m2 > 0:
        raise SingularFim("weighted moment is zero")
    data_only = SPEED_OF_LIGHT**2 / (32.0 * math.pi**2) * sig.grid.bandwidth_hz / sig.energy / m2
    if prior_precision is None:
        return data_only
    # Work in range units: r = cτ/2, so information scales by (2/c)² per τ index.
    to_range = np.diag([2.0 / SPEED_OF_LIGHT, 1.0])
    prior = np.atleast_2d(np.asarray(prior_precision, dtype=float))
    if prior.shape == (1, 1):
        f_total = 1.0 / data_only + prior[0, 0]
        if not f_total > 0:
            raise SingularFim("total information is not positive")
        return 1.0 / f_total
    if prior.shape != (2, 2):
        raise ValueError("prior_precision must be scalar or 2x2")
    if data_fim is None:
        f_data = np.diag([1.0 / data_only, 0.0])
    else:
        f_data = to_range @ np.asarray(data_fim, dtype=float) @ to_range
    try:
        cov = np.linalg.inv(f_data + prior)
    except np.linalg.LinAlgError as exc:
        raise SingularFim(str(exc)) from exc
    if not np.all(np.isfinite(cov)) or cov[0, 0] < 0:
        raise SingularFim("total FIM is not invertible")
    return float(cov[0, 0])


def _ifft_centered(values: np.ndarray, n_out: int, scale: float) -> np.ndarray:
    """Σ_k v_k·e^{j2πf_k n/B}·scale for midpoint bins f_k, n = 0..n_out-1."""
    m = values.size
    n = np.arange(n_out)
    ph = np.exp(-1j * np.pi * n) * np.exp(1j * np.pi * n / m)
    return np.fft.ifft(values)[:n_out] * m * scale * ph


def noise_autocovariance(noise: NoisePsd, oversample: int = 32) -> np.ndarray:
    """Lags r[m] = ∫ N(f)e^{j2πfm/B} df for m = 0..N-1.

    ``oversample`` > 1 integrates the PSD exactly over cells that much finer than
    the bins, holding only the exponential constant per cell. ``oversample`` = 1
    uses the bin values themselves.
    """
    g = noise.grid
    if oversample < 1:
        raise ValueError("oversample must be >= 1")
    if oversample == 1:
        dens = np.asarray(noise.values)
    else:
        m = oversample * g.n_bins
        comps = noise.inputs.components(np.linspace(-0.5 * g.bandwidth_hz, 0.5 * g.bandwidth_hz, m + 1))
        if noise.convention == "comm":
            comps.pop("phase_noise")
        dens = sum(comps.values())
    return _ifft_centered(dens, g.n_bins, g.bandwidth_hz / dens.size)


def time_samples(sig: SensingSignalSpec) -> tuple[np.ndarray, np.ndarray]:
    """s[n] and ∂s[n]/∂τ at t_n = n/B."""
    df = sig.grid.bin_spacing_hz
    n = sig.grid.n_bins
    return _ifft_centered(sig.spectrum(), n, df), _ifft_centered(sig.d_spectrum_d_tau(), n, df)


def exact_time_fim(sig: SensingSignalSpec, noise: NoisePsd, include_doppler: bool = False,
                   oversample: int = 32) -> FimResult:
    """FIM entries 2·Re{∂s_iᴴ Σ⁻¹ ∂s_j} with a dense Toeplitz covariance Σ."""
    noise.require("sense")
    g = sig.grid
    if noise.grid != g:
        raise ValueError("signal and noise grids differ")
    if g.n_bins > MAX_EXACT_BINS:
        raise ValueError(f"exact path limited to {MAX_EXACT_BINS} bins")
    r = noise_autocovariance(noise, oversample)
    cov = sla.toeplitz(r, np.conj(r))
    try:
        factor = sla.cho_factor(cov, lower=True, check_finite=False)
    except sla.LinAlgError as exc:
        raise CovarianceNotPD("noise covariance is not positive definite on this grid") from exc
    s, ds_tau = time_samples(sig)
    derivs = [ds_tau]
    if include_doppler:
        t = (np.arange(g.n_bins) - 0.5 * (g.n_bins - 1)) * g.sample_period_s
        derivs.append(2j * np.pi * t * s)
    d = np.column_stack(derivs)
    fim = 2.0 * np.real(d.conj().T @ sla.cho_solve(factor, d, check_finite=False))
    fim = 0.5 * (fim + fim.T)
    return _result(float(fim[0, 0]), "exact_time", fim if include_doppler else None)
