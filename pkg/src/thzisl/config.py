"""Experiment configuration: tier presets layered with file and command-line overrides.

A config is a nested mapping whose shape is fixed by the preset of its tier.
Resolution order: tier preset, then the YAML file, then ``--set key=value``
overrides. Unknown keys and wrongly typed values raise :class:`ConfigError`
naming the dotted path. The config hash is SHA-256 over canonical JSON of the
fully resolved mapping (sorted keys, no whitespace).
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import yaml

from .capacity import LinkOperatingPoint
from .core_model import ArrayConfig, GainBreakdown, HardwareProfile, gain_breakdown
from .errors import ConfigError
from .isac_tradeoff import ResourceModel, SensingScenario
from .montecarlo_validation import McConfig, ValidationSetup
from .noise_spectra import DistortionBudget, PhaseNoiseModel, RsmModel, distortion_budget
from .units import db_to_lin

TIERS = ("baseline", "low_cost", "ideal", "custom")

_BASELINE: dict[str, Any] = {
    "tier": "baseline",
    "seed": 20240611,
    "array": {
        "n_tx": 64, "n_rx": 64, "spacing_wavelengths": 0.5, "steer_angle_deg": 30.0,
        "carrier_hz": 140e9, "bandwidth_hz": 20e9, "range_m": 1.0e6,
    },
    "hardware": {
        "gamma_pa_db": -22.0, "adc_bits": 7, "irr_db": 20.0, "ps_bits": 4, "jitter_s": 50e-15,
        "amp_err_rms": 0.1, "point_err_rad": 1e-4, "rel_pn_var_tx": 0.0, "rel_pn_var_rx": 0.0,
        "diff_jitter_s": 0.0, "loop_loss_db": 3.0, "f_eff_hz": 5e9,
    },
    "tracking": {
        "residual_var": 0.01, "loop_bw_hz": 10e6, "floor_share": 0.05, "flicker_share": 0.0,
        "flicker_corner_hz": 1e3,
    },
    "resource": {"c_pn": 0.01, "c_dse": 0.01 * 0.16**4, "physics": None},
    "rsm": {"symbol_rate_hz": 1e9, "total_power_ratio": 0.0, "line_width_hz": 1e6, "n_harmonics": 0},
    "link": {"snr0_db": 20.0, "distortion_mode": "directional"},
    "sensing": {"energy_ref": 1.12e5, "snr_ref": 1.0, "n_bins": 2048, "alpha": 0.1},
    "overrides": {"gamma_total": 0.006},
    "sweeps": {
        "snr0_db": [-30.0, 50.0, 161],
        "alpha_points": 200,
        "bandwidth_hz": [1e9, 2e9, 5e9, 10e9, 15e9, 20e9],
        "mimo_n": [16, 32, 64, 128, 256],
    },
    "validation": {
        "n_points": 10, "n_bins": 2048, "rx_snr_db": 25.0, "rsm_symbol_rate_hz": 1e9,
        "rsm_power_ratio": 1e-3, "rsm_line_width_hz": 1e6, "oversample": 32,
        "mc_samples": 1_000_000, "mc_sigma_sq": [0.01, 0.1, 0.5],
    },
}

_PHYSICS_SCHEMA = {"q_j": 1.0, "t_frame_s": 1.0, "e_total_over_n0": 1.0}

# Paths whose value may be null in addition to the preset type.
_NULLABLE = {"hardware.gamma_pa_db", "hardware.f_eff_hz", "resource.physics", "overrides.gamma_total"}


def _preset(tier: str) -> dict:
    cfg = copy.deepcopy(_BASELINE)
    cfg["tier"] = tier
    if tier == "low_cost":
        cfg["hardware"]["gamma_pa_db"] = -8.0
        cfg["overrides"]["gamma_total"] = None
    elif tier == "ideal":
        cfg["hardware"].update(gamma_pa_db=None, adc_bits=16, irr_db=100.0, ps_bits=16, jitter_s=0.0,
                               amp_err_rms=0.0, point_err_rad=0.0, loop_loss_db=0.0)
        cfg["overrides"]["gamma_total"] = None
    elif tier not in ("baseline", "custom"):
        raise ConfigError(f"unknown tier {tier!r}; expected one of {TIERS}", "tier")
    return cfg


def preset(tier: str) -> dict:
    """A fresh copy of the resolved preset mapping for ``tier``."""
    return _preset(tier)


def _coerce(value: Any, template: Any, path: str) -> Any:
    if value is None:
        if path in _NULLABLE or template is None:
            return None
        raise ConfigError("may not be null", path)
    if path == "resource.physics":
        if not isinstance(value, Mapping):
            raise ConfigError("must be a mapping", path)
        _check_keys(value, _PHYSICS_SCHEMA, path)
        return {k: _coerce(v, _PHYSICS_SCHEMA[k], f"{path}.{k}") for k, v in value.items()}
    if isinstance(template, Mapping):
        if not isinstance(value, Mapping):
            raise ConfigError("must be a mapping", path)
        _check_keys(value, template, path)
        return {k: _coerce(v, template[k], f"{path}.{k}" if path else k) for k, v in value.items()}
    if isinstance(template, list):
        if not isinstance(value, list):
            raise ConfigError("must be a list", path)
        proto = template[0] if template else 0.0
        return [_coerce(v, proto, f"{path}[{i}]") for i, v in enumerate(value)]
    if isinstance(template, bool):
        if not isinstance(value, bool):
            raise ConfigError("must be true or false", path)
        return value
    if isinstance(template, (int, float)) or (template is None and path in _NULLABLE):
        if isinstance(value, str):
            try:
                value = float(value)
            except ValueError:
                raise ConfigError(f"expected a number, got {value!r}", path) from None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", path)
        if not math.isfinite(value):
            raise ConfigError("must be finite", path)
        if isinstance(template, int) and not isinstance(template, bool):
            if float(value) != int(value):
                raise ConfigError(f"expected an integer, got {value!r}", path)
            return int(value)
        return float(value)
    if isinstance(template, str):
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", path)
        return value
    raise ConfigError("unsupported value", path)


def _check_keys(value: Mapping, template: Mapping, path: str) -> Mapping:
    for k in value:
        if k not in template:
            raise ConfigError("unknown key", f"{path}.{k}" if path else str(k))
    return value


def _merge(base: dict, update: Mapping) -> dict:
    out = dict(base)
    for k, v in update.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), Mapping):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def parse_set(assignment: str) -> dict:
    """Turn ``a.b.c=value`` into a nested mapping; the value is parsed as YAML."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not key=value", "--set")
    key, raw = assignment.split("=", 1)
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise ConfigError("empty key", "--set")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse value: {exc}", key) from None
    node: dict = {parts[-1]: value}
    for p in reversed(parts[:-1]):
        node = {p: node}
    return node


def resolve(user: Mapping | None = None, tier: str | None = None, sets=()) -> dict:
    """Fully resolved, validated config mapping."""
    user = dict(user or {})
    chosen = tier or user.get("tier") or "baseline"
    if chosen not in TIERS:
        raise ConfigError(f"unknown tier {chosen!r}; expected one of {TIERS}", "tier")
    base = _preset(chosen)
    merged = _merge(base, user)
    for s in sets:
        merged = _merge(merged, parse_set(s))
    merged["tier"] = chosen
    return _coerce(merged, base, "")


def load_yaml(path: str | Path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", str(path)) from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}", str(path)) from None
    if data is None:
        return {}
    if not isinstance(data, Mapping):
        raise ConfigError("top level must be a mapping", str(path))
    return dict(data)


def canonical_json(cfg: Mapping) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(cfg: Mapping) -> str:
    return hashlib.sha256(canonical_json(cfg).encode("utf-8")).hexdigest()


def dump_yaml(cfg: Mapping) -> str:
    return yaml.safe_dump(dict(cfg), sort_keys=True)


@dataclass(frozen=True)
class ExperimentConfig:
    """Typed view of a resolved config mapping."""

    raw: Mapping
    tier: str
    seed: int
    array: ArrayConfig
    hardware: HardwareProfile
    tracking: PhaseNoiseModel
    residual_var: float
    resource: ResourceModel
    rsm: RsmModel
    budget: DistortionBudget
    snr0: float
    distortion_mode: str

    @property
    def gain(self) -> GainBreakdown:
        return gain_breakdown(self.array, self.hardware)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    def operating_point(self, snr0: float | None = None) -> LinkOperatingPoint:
        return LinkOperatingPoint(snr0=self.snr0 if snr0 is None else snr0, gain=self.gain,
                                  budget=self.budget, sigma_phi_res=self.residual_var,
                                  rsm=self.rsm, distortion_mode=self.distortion_mode)

    def sensing_scenario(self, **changes) -> SensingScenario:
        s = self.raw["sensing"]
        kw = dict(cfg=self.array, hw=self.hardware, gamma_total=self.budget.gamma_total,
                  energy_ref=s["energy_ref"], snr_ref=s["snr_ref"], n_bins=s["n_bins"],
                  loop_bw_hz=self.tracking.loop_bw_hz,
                  pn_floor_share=self.raw["tracking"]["floor_share"], rsm=self.rsm)
        kw.update(changes)
        return SensingScenario(**kw)

    @property
    def alpha(self) -> float:
        return float(self.raw["sensing"]["alpha"])

    def alpha_grid(self) -> np.ndarray:
        return np.logspace(-2.0, 0.0, int(self.raw["sweeps"]["alpha_points"]))

    def snr0_db_grid(self) -> np.ndarray:
        lo, hi, n = self.raw["sweeps"]["snr0_db"]
        return np.linspace(lo, hi, int(n))

    def validation_setup(self) -> ValidationSetup:
        v = self.raw["validation"]
        return ValidationSetup(carrier_hz=self.array.carrier_hz,
                               steer_angle_rad=self.array.steer_angle_rad,
                               n_bins=v["n_bins"], rx_snr=10 ** (v["rx_snr_db"] / 10),
                               gamma_total=self.budget.gamma_total, pn_var=self.residual_var,
                               loop_bw_hz=self.tracking.loop_bw_hz,
                               rsm=RsmModel(v["rsm_symbol_rate_hz"], v["rsm_power_ratio"],
                                            v["rsm_line_width_hz"]),
                               oversample=v["oversample"])

    def mc_config(self) -> McConfig:
        return McConfig(n_samples=self.raw["validation"]["mc_samples"], seed=self.seed)


def build(cfg: Mapping) -> ExperimentConfig:
    """Construct typed objects; constructor validation errors are reported with their section."""
    section = "array"
    try:
        a = cfg["array"]
        array = ArrayConfig(n_tx=a["n_tx"], n_rx=a["n_rx"], spacing_wavelengths=a["spacing_wavelengths"],
                            steer_angle_rad=math.radians(a["steer_angle_deg"]), carrier_hz=a["carrier_hz"],
                            bandwidth_hz=a["bandwidth_hz"], range_m=a["range_m"])
        section = "hardware"
        h = cfg["hardware"]
        hw = HardwareProfile(
            gamma_pa=0.0 if h["gamma_pa_db"] is None else float(db_to_lin(h["gamma_pa_db"])),
            adc_bits=h["adc_bits"], irr_db=h["irr_db"], ps_bits=h["ps_bits"], jitter_s=h["jitter_s"],
            amp_err_rms=h["amp_err_rms"], point_err_rad=h["point_err_rad"],
            rel_pn_var_tx=h["rel_pn_var_tx"], rel_pn_var_rx=h["rel_pn_var_rx"],
            diff_jitter_s=h["diff_jitter_s"], loop_loss=float(db_to_lin(h["loop_loss_db"])))
        f_eff = array.bandwidth_hz / 4.0 if h["f_eff_hz"] is None else h["f_eff_hz"]
        section = "overrides"
        budget = distortion_budget(hw, f_eff, cfg["overrides"]["gamma_total"])
        section = "tracking"
        t = cfg["tracking"]
        tracking = PhaseNoiseModel.calibrated(t["residual_var"], array.bandwidth_hz, t["loop_bw_hz"],
                                              t["floor_share"], t["flicker_share"], t["flicker_corner_hz"])
        section = "resource"
        r = cfg["resource"]
        if r["physics"] is None:
            resource = ResourceModel(c_pn=r["c_pn"], c_dse=r["c_dse"])
        else:
            p = r["physics"]
            missing = set(_PHYSICS_SCHEMA) - set(p)
            if missing:
                raise ConfigError(f"missing {sorted(missing)}", "resource.physics")
            resource = ResourceModel.from_physics(q_j=p["q_j"], t_frame_s=p["t_frame_s"],
                                                  carrier_hz=array.carrier_hz, loop_loss=hw.loop_loss,
                                                  n0=1.0, e_total_j=p["e_total_over_n0"])
        section = "rsm"
        rs = cfg["rsm"]
        rsm = RsmModel(rs["symbol_rate_hz"], rs["total_power_ratio"], rs["line_width_hz"], rs["n_harmonics"])
        section = "link"
        mode = cfg["link"]["distortion_mode"]
        if mode not in ("directional", "uncorrelated"):
            raise ConfigError(f"unknown distortion mode {mode!r}", "link.distortion_mode")
        section = "sensing"
        alpha = cfg["sensing"]["alpha"]
        if not 0 < alpha <= 1:
            raise ConfigError("alpha must lie in (0, 1]", "sensing.alpha")
        section = "seed"
        if not 0 <= cfg["seed"] < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer", "seed")
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc), section) from None
    return ExperimentConfig(raw=cfg, tier=cfg["tier"], seed=int(cfg["seed"]), array=array, hardware=hw,
                            tracking=tracking, residual_var=cfg["tracking"]["residual_var"],
                            resource=resource, rsm=rsm, budget=budget,
                            snr0=float(db_to_lin(cfg["link"]["snr0_db"])), distortion_mode=mode)


def load(path: str | Path | None = None, tier: str | None = None, sets=(), seed: int | None = None) -> ExperimentConfig:
    user = load_yaml(path) if path else {}
    extra = list(sets)
    if seed is not None:
        extra.append(f"seed={int(seed)}")
    return build(resolve(user, tier, extra))
