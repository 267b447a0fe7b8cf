"""Pilot-overhead trade-off between net communication rate and ranging precision.

The overhead α sets two competing phase errors: the tracked residual phase
noise falls as C_PN/α (more pilot energy), while the dynamic state-estimation
mismatch grows as C_DSE/α⁵ (longer prediction horizon under a constant
acceleration model driven by white jerk noise).
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np
from scipy import optimize

from .capacity import LinkOperatingPoint
from .core_model import ArrayConfig, GainBreakdown, HardwareProfile, gain_breakdown
from .errors import AlphaOutOfRange, CrossoverOutsideUnit, ModelValidityWarning
from .noise_spectra import (NoiseInputs, PhaseNoiseModel, RsmModel, SpectralGrid,
                            build_noise_psd)
from .sensing_fim import array_signal, bcrlb
from .units import SPEED_OF_LIGHT

DEFAULT_C_PN = 0.01
DEFAULT_C_DSE = 0.01 * 0.16**4
Regime = Literal["dse_dominated", "pn_dominated"]


def default_alpha_grid(n: int = 200) -> np.ndarray:
    return np.logspace(-2.0, 0.0, n)


def _check_alpha(alpha) -> np.ndarray:
    a = np.asarray(alpha, dtype=float)
    if np.any(~(a > 0)) or np.any(a > 1):
        raise AlphaOutOfRange(f"alpha must lie in (0, 1], got {alpha!r}")
    return a


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


@dataclass(frozen=True)
class PhysicsDerivation:
    """Inputs from which C_PN and C_DSE are composed instead of given directly."""

    q_j: float
    t_frame_s: float
    carrier_hz: float
    loop_loss: float
    n0: float
    e_total_j: float

    def __post_init__(self):
        if min(self.q_j, self.t_frame_s, self.carrier_hz, self.n0, self.e_total_j) <= 0:
            raise ValueError("physics inputs must be positive")
        if self.loop_loss < 1:
            raise ValueError("loop_loss must be >= 1")


def c_pn_from_loop(loop_loss: float, n0: float, e_total_j: float) -> float:
    """C_PN = Γ_loop·N₀/(2E_total)."""
    return loop_loss * n0 / (2.0 * e_total_j)


def ca_position_var(q_j: float, dt_s: float) -> float:
    """Position error of a constant-acceleration predictor after Δt: q_j·Δt⁵/20."""
    if q_j < 0 or dt_s < 0:
        raise ValueError("q_j and dt_s must be non-negative")
    return q_j * dt_s**5 / 20.0


def c_dse_from_kinematics(carrier_hz: float, q_j: float, t_frame_s: float) -> float:
    """C_DSE = (4πf_c/c)²·(q_j/20)·T_frame⁵ (two-way phase of the position error)."""
    return (4.0 * math.pi * carrier_hz / SPEED_OF_LIGHT) ** 2 * ca_position_var(q_j, t_frame_s)


@dataclass(frozen=True)
class ResourceModel:
    c_pn: float = DEFAULT_C_PN
    c_dse: float = DEFAULT_C_DSE
    physics: PhysicsDerivation | None = None

    def __post_init__(self):
        if not self.c_pn > 0 or not self.c_dse > 0:
            raise ValueError("c_pn and c_dse must be > 0")

    @property
    def derivation(self) -> str:
        return "direct" if self.physics is None else "physics"

    @classmethod
    def from_physics(cls, q_j: float, t_frame_s: float, carrier_hz: float,
                     loop_loss: float, n0: float, e_total_j: float) -> "ResourceModel":
        p = PhysicsDerivation(q_j, t_frame_s, carrier_hz, loop_loss, n0, e_total_j)
        return cls(c_pn=c_pn_from_loop(loop_loss, n0, e_total_j),
                   c_dse=c_dse_from_kinematics(carrier_hz, q_j, t_frame_s), physics=p)


def sigma_pn_var(alpha, model: ResourceModel):
    """Residual tracked phase variance C_PN/α (rad²)."""
    return _out(model.c_pn / _check_alpha(alpha))


def sigma_dse_var(alpha, model: ResourceModel, warn: bool = True):
    """DSE phase-mismatch variance C_DSE/α⁵ (rad²); warns outside the small-mismatch regime."""
    v = model.c_dse / _check_alpha(alpha) ** 5
    if warn and np.any(v >= 1.0):
        warnings.warn("sigma_dse >= 1 rad^2: mismatch surrogate no longer valid",
                      ModelValidityWarning, stacklevel=2)
    return _out(v)


def alpha_star(model: ResourceModel) -> float:
    """Crossover overhead (C_DSE/C_PN)^{1/4} where both variances are equal."""
    a = (model.c_dse / model.c_pn) ** 0.25
    if a > 1:
        warnings.warn(f"crossover alpha*={a:.4g} lies above 1", CrossoverOutsideUnit, stacklevel=2)
        return a
    pn, dse = sigma_pn_var(a, model), sigma_dse_var(a, model, warn=False)
    if abs(pn - dse) > 1e-12 * pn:
        raise ArithmeticError(f"crossover mismatch {pn} vs {dse}")
    return a


def regime(alpha: float, model: ResourceModel) -> Regime:
    dse = sigma_dse_var(alpha, model, warn=False)
    return "dse_dominated" if dse > sigma_pn_var(alpha, model) else "pn_dominated"


def c_j_alpha(alpha, op: LinkOperatingPoint, model: ResourceModel):
    """log₂(1 + SNR₀G·e^{-C_PN/α} / (1 + SNR₀G·Γ + C_DSE/α⁵)) with G = G_sig,avg."""
    a = _check_alpha(alpha)
    sg = op.snr0 * op.gain.g_sig_avg
    sinr = sg * np.exp(-model.c_pn / a) / (1.0 + sg * op.budget.gamma_total + model.c_dse / a**5)
    return _out(np.log2(1.0 + sinr))


def r_net(alpha, op: LinkOperatingPoint, model: ResourceModel):
    """Net spectral efficiency (1 - α)·C_J(α)."""
    a = _check_alpha(alpha)
    return _out((1.0 - a) * np.asarray(c_j_alpha(a, op, model)))


def optimal_alpha(op: LinkOperatingPoint, model: ResourceModel,
                  grid: np.ndarray | None = None) -> tuple[float, float]:
    """argmax of r_net: coarse log grid, then bounded scalar refinement between neighbours."""
    grid = default_alpha_grid() if grid is None else np.asarray(grid, dtype=float)
    vals = np.asarray(r_net(grid, op, model))
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = optimize.minimize_scalar(lambda a: -r_net(a, op, model), bounds=(lo, hi),
                                   method="bounded", options={"xatol": 1e-10})
    if -res.fun >= vals[i]:
        return float(res.x), float(-res.fun)
    return float(grid[i]), float(vals[i])


# ---------------------------------------------------------------- sensing side

IMPAIRMENT_STAGES = ("thermal", "hw", "pn", "dse")


@dataclass(frozen=True)
class SensingScenario:
    """Ranging link used for RMSE(α).

    ``energy_ref`` and ``snr_ref`` are the observation energy over N₀ and the
    received power over N₀B before array gain; the array then scales both by
    its gain, so E = energy_ref·N₀·G_ideal·ρ_static·η̄ and P_rx = snr_ref·N₀B·G_sig,avg.
    """

    cfg: ArrayConfig
    hw: HardwareProfile
    gamma_total: float
    energy_ref: float
    snr_ref: float
    n_bins: int = 2048
    n0: float = 1.0
    loop_bw_hz: float = 10e6
    pn_floor_share: float = 0.05
    rsm: RsmModel = field(default_factory=RsmModel)

    @property
    def grid(self) -> SpectralGrid:
        return SpectralGrid(self.n_bins, self.cfg.bandwidth_hz)

    @property
    def gain(self) -> GainBreakdown:
        return gain_breakdown(self.cfg, self.hw)

    @property
    def p_rx(self) -> float:
        return self.snr_ref * self.n0 * self.cfg.bandwidth_hz * self.gain.g_sig_avg

    def noise_inputs(self, alpha: float, model: ResourceModel,
                     stages: Iterable[str] = IMPAIRMENT_STAGES) -> NoiseInputs:
        stages = set(stages)
        unknown = stages - set(IMPAIRMENT_STAGES)
        if unknown:
            raise ValueError(f"unknown impairment stage(s) {sorted(unknown)}")
        b = self.cfg.bandwidth_hz
        p_rx = self.p_rx
        pn = PhaseNoiseModel()
        if "pn" in stages:
            pn = PhaseNoiseModel.calibrated(sigma_pn_var(alpha, model), b, self.loop_bw_hz,
                                            self.pn_floor_share)
        return NoiseInputs(
            n0=self.n0, bandwidth_hz=b,
            sigma_gamma_psd=p_rx * self.gamma_total / b if "hw" in stages else 0.0,
            sigma_dse_psd=self.n0 * sigma_dse_var(alpha, model, warn=False) if "dse" in stages else 0.0,
            rsm=self.rsm, phase_noise=pn, p_sig_ref=p_rx)

    def rmse(self, alpha: float, model: ResourceModel,
             stages: Iterable[str] = IMPAIRMENT_STAGES) -> float:
        g = self.grid
        noise = build_noise_psd("sense", g, self.noise_inputs(alpha, model, stages))
        sig = array_signal(g, self.cfg, self.hw, self.energy_ref * self.n0)
        return math.sqrt(bcrlb(sig, noise))


@dataclass(frozen=True)
class ParetoPoint:
    alpha: float
    r_net: float
    rmse_m: float
    regime: Regime
    feasible: bool = True


@dataclass(frozen=True)
class ParetoScan:
    points: tuple[ParetoPoint, ...]
    frontier: tuple[ParetoPoint, ...]


def non_dominated(points: Sequence[ParetoPoint]) -> tuple[ParetoPoint, ...]:
    """Points no other point beats on both r_net (max) and rmse_m (min), ordered by rmse."""
    order = sorted(points, key=lambda p: (p.rmse_m, -p.r_net))
    front, best_rate = [], -math.inf
    for p in order:
        if p.r_net > best_rate:
            front.append(p)
            best_rate = p.r_net
    return tuple(front)


def pareto_scan(alpha_grid, op: LinkOperatingPoint, scenario: SensingScenario,
                model: ResourceModel, parallel: bool = False) -> ParetoScan:
    grid = _check_alpha(alpha_grid)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("alpha_grid must be strictly increasing")

    def point(a: float) -> ParetoPoint:
        return ParetoPoint(alpha=float(a), r_net=float(r_net(a, op, model)),
                           rmse_m=scenario.rmse(a, model), regime=regime(a, model),
                           feasible=bool(sigma_dse_var(a, model, warn=False) <= 1.0))

    if parallel:
        with ThreadPoolExecutor() as pool:
            pts = tuple(pool.map(point, grid))
    else:
        pts = tuple(point(a) for a in grid)
    return ParetoScan(points=pts, frontier=non_dominated(pts))


def ablation(alpha_grid, scenario: SensingScenario, model: ResourceModel) -> list[dict]:
    """RMSE(α) with impairments switched on cumulatively: thermal, +HW, +PN, +DSE."""
    rows = []
    for a in _check_alpha(alpha_grid):
        row = {"alpha": float(a)}
        for k in range(1, len(IMPAIRMENT_STAGES) + 1):
            stages = IMPAIRMENT_STAGES[:k]
            row[f"rmse_{stages[-1]}_m"] = scenario.rmse(float(a), model, stages)
        rows.append(row)
    return rows
