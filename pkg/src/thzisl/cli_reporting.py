"""Command-line experiment runner.

    thzisl <experiment> [--config FILE] [--tier NAME] [--set key=value ...]
                        [--out DIR] [--seed N] [--parallel]

Each experiment writes its CSV tables and plot scripts into
``<out>/<experiment>/`` next to a ``manifest.json``, then prints a summary table.
Exit status is 0 on success, 1 when an experiment or a validation verdict fails,
2 on a config error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import __version__
from .capacity import c_jensen, c_sat, knee_snr, snr_crit, snr_sweep
from .config import ExperimentConfig, config_hash, dump_yaml, load
from .core_model import eta_bsq_avg, kappa, path_loss
from .errors import ConfigError, ExperimentFailed, MissingColumn, ThzIslError
from .isac_tradeoff import (IMPAIRMENT_STAGES, ablation, alpha_star, c_j_alpha, optimal_alpha,
                            pareto_scan, r_net, regime, sigma_dse_var, sigma_pn_var)
from .montecarlo_validation import (mc_bussgang, mimo_scaling_experiment, slope_fit,
                                    whittle_validation_grid, whittle_vs_exact)
from .noise_spectra import (NoiseInputs, SpectralGrid, build_noise_psd, sigma_phi_res_var)
from .sensing_fim import (array_signal, exact_time_fim, fim_awgn_closed, flat_signal,
                          rmse_awgn, whittle_fim_tau)
from .units import lin_to_db

OUT_DIR_ENV = "THZISL_OUT_DIR"
EXPERIMENTS = ("link-budget", "capacity-sweep", "sensing-sweep", "alpha-sweep", "pareto",
               "mimo-scaling", "ablation", "validate")


# ---------------------------------------------------------------- output helpers

def format_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.8e}"
    return str(v)


def write_csv(path: Path, rows: Sequence[Mapping], columns: Sequence[str] | None = None) -> Path:
    """UTF-8, comma separated, header row, floats in %.8e (9 significant digits)."""
    columns = list(columns or (rows[0].keys() if rows else []))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_cell(r[c]) for c in columns])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def read_header(csv_path: Path) -> list[str]:
    with open(csv_path, newline="", encoding="utf-8") as fh:
        return next(csv.reader(fh), [])


_PLOT_TEMPLATE = '''"""Plot for {csv_name}. Run with python; needs matplotlib."""
import csv
from pathlib import Path

import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent


def column(path, name):
    with open(path, newline="", encoding="utf-8") as fh:
        return [float(r[name]) for r in csv.DictReader(fh)]


fig, ax = plt.subplots(figsize=(6, 4))
{body}
ax.set_xlabel({xlabel!r})
ax.set_ylabel({ylabel!r})
ax.grid(True, which="both", alpha=0.3)
ax.legend()
fig.tight_layout()
fig.savefig(HERE / {png!r}, dpi=150)
'''


def emit_plot_description(csv_path, kind: str, x: str, y: Sequence[str] | str, *,
                          hlines: Mapping[str, float] | None = None,
                          vlines: Mapping[str, float] | None = None,
                          frontier_csv: str | None = None,
                          xlabel: str | None = None, ylabel: str | None = None) -> Path:
    """Write ``<csv stem>_plot.py`` next to the CSV. Columns are checked against its header."""
    csv_path = Path(csv_path)
    ys = [y] if isinstance(y, str) else list(y)
    header = read_header(csv_path)
    for col in [x, *ys]:
        if col not in header:
            raise MissingColumn(f"{csv_path.name} has no column {col!r}")
    if kind not in ("line", "loglog", "pareto"):
        raise ValueError(f"unknown plot kind {kind!r}")
    data = f'HERE / {csv_path.name!r}'
    lines = []
    if kind == "pareto":
        lines.append(f'ax.scatter(column({data}, {x!r}), column({data}, {ys[0]!r}), s=8, label="all points")')
        if frontier_csv:
            if not all(c in read_header(csv_path.parent / frontier_csv) for c in (x, ys[0])):
                raise MissingColumn(f"{frontier_csv} lacks {x!r} or {ys[0]!r}")
            fr = f'HERE / {frontier_csv!r}'
            lines.append(f'ax.plot(column({fr}, {x!r}), column({fr}, {ys[0]!r}), "k-", label="frontier")')
        lines.append('ax.set_xscale("log")')
    else:
        for col in ys:
            lines.append(f'ax.plot(column({data}, {x!r}), column({data}, {col!r}), label={col!r})')
        if kind == "loglog":
            lines += ['ax.set_xscale("log")', 'ax.set_yscale("log")']
    for name, v in (hlines or {}).items():
        lines.append(f'ax.axhline({float(v)!r}, ls="--", color="gray", label={name!r})')
    for name, v in (vlines or {}).items():
        lines.append(f'ax.axvline({float(v)!r}, ls=":", color="red", label={name!r})')
    script = _PLOT_TEMPLATE.format(csv_name=csv_path.name, body="\n".join(lines),
                                   xlabel=xlabel or x, ylabel=ylabel or ", ".join(ys),
                                   png=csv_path.stem + ".png")
    out = csv_path.with_name(csv_path.stem + "_plot.py")
    out.write_text(script, encoding="utf-8")
    return out


@dataclass(frozen=True)
class RunManifest:
    experiment: str
    config_hash: str
    version: str
    seed: int
    timestamp: str
    outputs: tuple[str, ...]
    verdicts: Mapping[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def to_json(self) -> str:
        d = asdict(self)
        d["outputs"] = list(self.outputs)
        d["verdicts"] = dict(self.verdicts)
        return json.dumps(d, indent=2, sort_keys=True)


@dataclass
class _Run:
    out_dir: Path
    cfg: ExperimentConfig
    parallel: bool
    outputs: list[str] = field(default_factory=list)
    summary: list[tuple[str, str]] = field(default_factory=list)
    verdicts: dict[str, bool] = field(default_factory=dict)

    def csv(self, name: str, rows, columns=None) -> Path:
        p = write_csv(self.out_dir / name, rows, columns)
        self.outputs.append(p.name)
        return p

    def plot(self, csv_path: Path, kind: str, x: str, y, **kw) -> None:
        p = emit_plot_description(csv_path, kind, x, y, **kw)
        self.outputs.append(p.name)

    def note(self, key: str, value) -> None:
        self.summary.append((key, format_cell(value) if not isinstance(value, str) else value))

    def verdict(self, key: str, ok: bool) -> None:
        self.verdicts[key] = bool(ok)
        self.note(key, "PASS" if ok else "FAIL")


# ---------------------------------------------------------------- experiments

def _link_budget(run: _Run) -> None:
    cfg = run.cfg
    g, b = cfg.gain, cfg.budget
    rows = [
        ("kappa", kappa(cfg.array)),
        ("aperture_over_lambda", cfg.array.aperture_wavelengths),
        ("far_field_ok", cfg.array.far_field_ok),
        ("path_loss_db", float(lin_to_db(path_loss(cfg.array)))),
        ("g_ideal", g.g_ideal), ("eta_bsq_avg", g.eta_bsq_avg), ("rho_q", g.rho_q),
        ("rho_ape", g.rho_ape), ("rho_a", g.rho_a), ("rho_pn", g.rho_pn), ("g_sig_avg", g.g_sig_avg),
        ("gamma_pa", b.gamma_pa), ("gamma_adc", b.gamma_adc), ("gamma_iq", b.gamma_iq),
        ("gamma_lo", b.gamma_lo), ("gamma_sum", b.gamma_sum), ("gamma_total", b.gamma_total),
        ("gamma_total_db", float(lin_to_db(b.gamma_total))),
        *[(f"fraction_{k}", v) for k, v in b.fractions().items()],
        ("sigma_phi_res", cfg.residual_var),
        ("c_sat", c_sat(b, cfg.residual_var)),
        ("snr_crit_db", float(lin_to_db(snr_crit(g, b, cfg.distortion_mode)))),
        ("knee_snr_db", float(lin_to_db(knee_snr(g, b)))),
        ("c_jensen_at_snr0", c_jensen(cfg.operating_point())),
        ("rate_gbps_at_snr0", c_jensen(cfg.operating_point()) * cfg.array.bandwidth_hz / 1e9),
    ]
    run.csv("link_budget.csv", [{"quantity": k, "value": v} for k, v in rows])
    for k, v in rows:
        run.note(k, v)


def _capacity_sweep(run: _Run) -> None:
    cfg = run.cfg
    rows = snr_sweep(cfg.operating_point(), cfg.array, cfg.snr0_db_grid())
    p = run.csv("capacity_sweep.csv", rows)
    run.plot(p, "line", "snr0_db", ["c_exact", "c_jensen"], hlines={"C_sat": rows[0]["c_sat"]},
             vlines={"SNR_crit": float(lin_to_db(knee_snr(cfg.gain, cfg.budget)))},
             ylabel="spectral efficiency [bits/s/Hz]")
    peak = max(rows, key=lambda r: r["gap"])
    run.note("c_sat", rows[0]["c_sat"])
    run.note("max_gap", peak["gap"])
    run.note("max_gap_at_snr0_db", peak["snr0_db"])


def _sensing_sweep(run: _Run) -> None:
    cfg = run.cfg
    rows = []
    for b in cfg.raw["sweeps"]["bandwidth_hz"]:
        arr = replace(cfg.array, bandwidth_hz=b)
        sc = cfg.sensing_scenario(cfg=arr)
        e = sc.energy_ref * sc.n0 * sc.gain.g_sig_avg
        rows.append({"bandwidth_hz": b, "kappa": kappa(arr), "eta_bsq_avg": eta_bsq_avg(arr),
                     "rmse_m": sc.rmse(cfg.alpha, cfg.resource),
                     "rmse_thermal_m": sc.rmse(cfg.alpha, cfg.resource, ("thermal",)),
                     "rmse_awgn_flat_m": rmse_awgn(e, sc.n0, b)})
    p = run.csv("sensing_sweep.csv", rows)
    run.plot(p, "loglog", "bandwidth_hz", ["rmse_m", "rmse_thermal_m", "rmse_awgn_flat_m"],
             ylabel="ranging RMSE [m]")
    run.note("rmse_at_max_bandwidth_m", rows[-1]["rmse_m"])


def _alpha_rows(cfg: ExperimentConfig) -> list[dict]:
    op, m = cfg.operating_point(), cfg.resource
    sc = cfg.sensing_scenario()
    rows = []
    for a in cfg.alpha_grid():
        rows.append({"alpha": float(a), "sigma_pn": sigma_pn_var(a, m),
                     "sigma_dse": sigma_dse_var(a, m, warn=False), "c_j": c_j_alpha(a, op, m),
                     "r_net": r_net(a, op, m), "rmse_m": sc.rmse(float(a), m), "regime": regime(a, m)})
    return rows


def _alpha_sweep(run: _Run) -> None:
    cfg = run.cfg
    rows = _alpha_rows(cfg)
    a_star = alpha_star(cfg.resource)
    p = run.csv("alpha_sweep.csv", rows)
    run.plot(p, "loglog", "alpha", ["sigma_pn", "sigma_dse"], vlines={"alpha*": a_star},
             ylabel="phase variance [rad^2]")
    run.plot(p, "loglog", "alpha", ["rmse_m"], vlines={"alpha*": a_star}, ylabel="ranging RMSE [m]")
    fit_pn = slope_fit([r["alpha"] for r in rows], [r["sigma_pn"] for r in rows])
    fit_dse = slope_fit([r["alpha"] for r in rows], [r["sigma_dse"] for r in rows])
    a_opt, r_opt = optimal_alpha(cfg.operating_point(), cfg.resource, cfg.alpha_grid())
    run.note("alpha_star", a_star)
    run.note("slope_sigma_pn", fit_pn.slope)
    run.note("slope_sigma_dse", fit_dse.slope)
    run.note("alpha_opt_rnet", a_opt)
    run.note("r_net_max", r_opt)


def _pareto(run: _Run) -> None:
    cfg = run.cfg
    scan = pareto_scan(cfg.alpha_grid(), cfg.operating_point(), cfg.sensing_scenario(),
                       cfg.resource, parallel=run.parallel)
    cols = ["alpha", "r_net", "rmse_m", "regime", "feasible"]
    p = run.csv("pareto.csv", [asdict(x) for x in scan.points], cols)
    run.csv("frontier.csv", [asdict(x) for x in scan.frontier], cols)
    run.plot(p, "pareto", "rmse_m", "r_net", frontier_csv="frontier.csv",
             xlabel="ranging RMSE [m]", ylabel="R_net [bits/s/Hz]")
    for a in (0.05, 0.10, 0.30):
        run.note(f"r_net@{a:.2f}", r_net(a, cfg.operating_point(), cfg.resource))
        run.note(f"rmse_m@{a:.2f}", cfg.sensing_scenario().rmse(a, cfg.resource))
    run.note("frontier_points", len(scan.frontier))


def _mimo(run: _Run) -> None:
    cfg = run.cfg
    res = mimo_scaling_experiment(cfg.raw["sweeps"]["mimo_n"], cfg.sensing_scenario(), cfg.resource,
                                  cfg.budget, alpha=cfg.alpha)
    rows = [{"n": n, "n_tx_n_rx": n * n, "kappa": kappa(replace(cfg.array, n_tx=n, n_rx=n)),
             "rmse_m": r, "snr_crit_db": float(lin_to_db(s)),
             "snr_crit_own_squint_db": float(lin_to_db(so))}
            for n, r, s, so in zip(res.n_values, res.rmse_m, res.snr_crit, res.snr_crit_own_squint)]
    p = run.csv("mimo_scaling.csv", rows)
    run.plot(p, "loglog", "n_tx_n_rx", ["rmse_m"], ylabel="ranging RMSE [m]")
    run.note("rmse_slope_vs_NtNr", res.rmse_fit.slope)
    run.note("snr_crit_slope_vs_NtNr", res.snr_crit_fit.slope)
    run.note("snr_crit_own_squint_slope", res.snr_crit_own_squint_fit.slope)


def _ablation(run: _Run) -> None:
    cfg = run.cfg
    sc = cfg.sensing_scenario()
    rows = ablation(cfg.alpha_grid(), sc, cfg.resource)
    p = run.csv("ablation.csv", rows)
    run.plot(p, "loglog", "alpha", [k for k in rows[0] if k != "alpha"],
             vlines={"alpha*": alpha_star(cfg.resource)}, ylabel="ranging RMSE [m]")
    a_star = alpha_star(cfg.resource)
    grid = sc.grid
    noise = build_noise_psd("sense", grid, sc.noise_inputs(a_star, cfg.resource))
    comp = {k: v for k, v in noise.components.items()}
    psd_rows = [{"f_offset_hz": float(f), "psd_w_per_hz": float(v),
                 **{f"{k}_w_per_hz": float(c[i]) for k, c in comp.items()}}
                for i, (f, v) in enumerate(zip(grid.freqs, noise.values))]
    p2 = run.csv("psd_decomposition.csv", psd_rows)
    run.plot(p2, "line", "f_offset_hz", ["psd_w_per_hz", *[f"{k}_w_per_hz" for k in comp]],
             ylabel="PSD [W/Hz]")
    run.note("hw_over_thermal_rmse", rows[-1]["rmse_hw_m"] / rows[-1]["rmse_thermal_m"])


def _validate(run: _Run) -> None:
    cfg = run.cfg
    setup = cfg.validation_setup()
    v = cfg.raw["validation"]
    grid = whittle_validation_grid(n_points=v["n_points"], setup=setup, parallel=run.parallel)
    p = run.csv("whittle_validation.csv", list(grid.rows),
                ["l_ap_over_lambda", "b_over_fc", "whittle_j", "exact_j", "rel_error"])
    run.plot(p, "line", "b_over_fc", ["rel_error"], ylabel="relative FIM error")
    run.note("whittle_max_error", grid.max_error)
    run.note("whittle_slope_vs_b_over_fc", grid.slope_vs_bw)
    run.note("whittle_slope_vs_aperture", grid.slope_vs_aperture)
    for k, ok in grid.verdicts.items():
        run.verdict(f"whittle_{k}", ok)
    base = whittle_vs_exact(cfg.array.aperture_wavelengths, cfg.array.fractional_bandwidth, setup)
    run.note("whittle_error_at_config", base["rel_error"])

    b = cfg.array.bandwidth_hz
    awgn = fim_awgn_closed(1.0, 1.0, b)
    flat_inputs = NoiseInputs(n0=1.0, bandwidth_hz=b)
    g4 = SpectralGrid(4096, b)
    jw = whittle_fim_tau(flat_signal(g4, 1.0), build_noise_psd("sense", g4, flat_inputs)).j_tau_tau
    g2 = SpectralGrid(2048, b)
    je = exact_time_fim(flat_signal(g2, 1.0), build_noise_psd("sense", g2, flat_inputs)).j_tau_tau
    run.verdict("awgn_whittle_within_0.1pct", abs(jw / awgn - 1) < 1e-3)
    run.verdict("awgn_exact_within_0.5pct", abs(je / awgn - 1) < 5e-3)

    alphas = np.logspace(-2, 0, 50)
    fit_pn = slope_fit(alphas, sigma_pn_var(alphas, cfg.resource))
    fit_dse = slope_fit(alphas, sigma_dse_var(alphas, cfg.resource, warn=False))
    run.verdict("slope_pn_is_-1", abs(fit_pn.slope + 1) < 1e-6)
    run.verdict("slope_dse_is_-5", abs(fit_dse.slope + 5) < 1e-6)

    rows = []
    for s2 in v["mc_sigma_sq"]:
        est = mc_bussgang(s2, cfg.mc_config(), parallel=run.parallel)
        ok = est.within(3.0)
        rows.append({"sigma_sq": s2, "coeff_est": est.coeff_est, "coeff_target": est.coeff_target,
                     "coeff_stderr": est.coeff_stderr, "distortion_power": est.distortion_power,
                     "distortion_target": est.distortion_target,
                     "distortion_stderr": est.distortion_stderr, "cross_corr": est.cross_corr,
                     "cross_stderr": est.cross_stderr, "pass": all(ok.values())})
        run.verdict(f"bussgang_sigma2={s2:g}", all(ok.values()))
    run.csv("bussgang_mc.csv", rows)

    pn_var = sigma_phi_res_var(cfg.tracking, g2)
    # small N0 keeps the sense/comm subtraction well conditioned
    inputs = NoiseInputs(n0=1e-12, bandwidth_hz=b, phase_noise=cfg.tracking, p_sig_ref=1.0)
    diff = build_noise_psd("sense", g2, inputs).integral() - build_noise_psd("comm", g2, inputs).integral()
    run.verdict("spectral_consistency", abs(diff - pn_var) <= 1e-6 * pn_var)


_RUNNERS: dict[str, Callable[[_Run], None]] = {
    "link-budget": _link_budget, "capacity-sweep": _capacity_sweep, "sensing-sweep": _sensing_sweep,
    "alpha-sweep": _alpha_sweep, "pareto": _pareto, "mimo-scaling": _mimo, "ablation": _ablation,
    "validate": _validate,
}


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_DIR_ENV, "runs"))


def run_experiment(name: str, cfg: ExperimentConfig, out_dir: str | Path | None = None,
                   parallel: bool = False, clock: Callable[[], _dt.datetime] | None = None) -> RunManifest:
    if name not in _RUNNERS:
        raise ConfigError(f"unknown experiment {name!r}; expected one of {EXPERIMENTS}", "experiment")
    target = Path(out_dir if out_dir is not None else default_out_dir()) / name
    target.mkdir(parents=True, exist_ok=True)
    run = _Run(out_dir=target, cfg=cfg, parallel=parallel)
    _RUNNERS[name](run)
    (target / "config.yaml").write_text(dump_yaml(cfg.raw), encoding="utf-8")
    run.outputs.append("config.yaml")
    now = (clock or (lambda: _dt.datetime.now(_dt.timezone.utc)))()
    manifest = RunManifest(experiment=name, config_hash=config_hash(cfg.raw), version=__version__,
                           seed=cfg.seed, timestamp=now.isoformat(timespec="seconds"),
                           outputs=tuple(run.outputs), verdicts=dict(run.verdicts))
    (target / "manifest.json").write_text(manifest.to_json() + "\n", encoding="utf-8")
    _print_summary(name, cfg, run.summary, manifest)
    return manifest


def _print_summary(name: str, cfg: ExperimentConfig, summary, manifest: RunManifest) -> None:
    width = max([len(k) for k, _ in summary] + [12])
    print(f"# {name}  tier={cfg.tier}  seed={cfg.seed}  config={manifest.config_hash[:12]}")
    for k, v in summary:
        print(f"{k:<{width}}  {v}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="thzisl", description=__doc__.split("\n\n")[0])
    p.add_argument("experiment", help=f"one of: {', '.join(EXPERIMENTS)}")
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--out", help=f"output directory (default ${OUT_DIR_ENV} or ./runs)")
    p.add_argument("--seed", type=int, help="64-bit seed for stochastic experiments")
    p.add_argument("--tier", help="hardware tier preset: baseline, low_cost, ideal, custom")
    p.add_argument("--parallel", action="store_true", help="evaluate sweep points concurrently")
    p.add_argument("--set", dest="sets", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry, e.g. --set hardware.gamma_pa_db=-10")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {args.experiment!r}; expected one of {EXPERIMENTS}",
                              "experiment")
        cfg = load(args.config, args.tier, args.sets, args.seed)
        manifest = run_experiment(args.experiment, cfg, args.out, args.parallel)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ExperimentFailed, ThzIslError, ArithmeticError) as exc:
        print(f"experiment failed: {exc}", file=sys.stderr)
        return 1
    if not manifest.passed:
        failed = [k for k, ok in manifest.verdicts.items() if not ok]
        print(f"validation failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
