"""Config-driven scenario runner.

Verbs: ``run <config>`` (single observation, writes visibility.csv,
intensity.csv and summary.json), ``sweep <config> --param --values``
(one CSV row per swept value), ``validate [--fast]`` (invariant suite).
Exit codes: 0 success, 1 invalid config (message names the offending
key), 2 runtime failure (message names the error). ENTBASE_THREADS caps
per-baseline parallelism; outputs are byte-identical at any thread count.
"""

from __future__ import annotations

import argparse
import cmath
import copy
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import validation
from .config import (
    SWEEPABLE_CHANNEL_PARAMS,
    ConfigError,
    ScenarioConfig,
    load_config,
    parse_config,
)
from .imaging import observe_and_image, true_visibility
from .protocol import derive_seed, run_observation
from .qcore import AstroVisibility, concurrence_subspace, subspace_weight, wrap_phase

__all__ = ["main"]


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    return format(float(x), ".17g")


def _write_csv(path: Path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _matrix_json(entries: np.ndarray):
    return [[[float(v.real), float(v.imag)] for v in row] for row in entries]


def _thread_count() -> int:
    raw = os.environ.get("ENTBASE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError("ENTBASE_THREADS", f"not an integer: {raw!r}")
    if n < 1:
        raise ConfigError("ENTBASE_THREADS", "must be >= 1")
    return n


def _resource_scales(cfg: ScenarioConfig, xi: float, conc: float):
    """Trend scales 1/(C sqrt(xi R_X)) and 1/sqrt(xi R_X) at the reported resource."""
    r_x = cfg.rates.R_E  # network-supplied photon fraction
    if r_x <= 0.0 or xi <= 0.0:
        return math.inf, math.inf
    dvp = 1.0 / math.sqrt(xi * r_x)
    dva = math.inf if conc <= 0.0 else dvp / conc
    return dva, dvp


def _emit_gnuplot(outdir: Path, kind: str):
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
    ]
    if kind == "run":
        lines += [
            "set terminal pngcairo size 900,600",
            "set output 'visibility.png'",
            "set xlabel 'baseline'",
            "set ylabel 'visibility amplitude'",
            "plot 'visibility.csv' using 1:2 with lines, '' using 1:4:6 with yerrorbars",
            "set output 'intensity.png'",
            "set xlabel 'angle [rad]'",
            "set ylabel 'intensity'",
            "plot 'intensity.csv' using 1:2 with lines, '' using 1:3 with lines, "
            "'' using 1:4 with lines",
        ]
    else:
        lines += [
            "set terminal pngcairo size 900,600",
            "set output 'sweep.png'",
            "set xlabel 'swept value'",
            "set ylabel 'ln R_M'",
            "plot 'sweep.csv' using 1:5 with linespoints",
        ]
    (outdir / "plot.gp").write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_run(config_path: str, gnuplot: bool = False) -> int:
    cfg = load_config(config_path)
    threads = _thread_count()
    report = observe_and_image(
        sky=cfg.sky, plan=cfg.plan, resource_factory=cfg.channel.resource_factory(),
        settings=cfg.settings, n_per_setting=cfg.n_per_setting, seed=cfg.seed,
        rates=cfg.rates, theta_grid=cfg.theta_grid, threads=threads,
        rate_norm_fn=cfg.channel.rate_norm_fn())

    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)

    vis_rows = []
    for i, b in enumerate(report.baselines):
        est = report.estimates[i]
        v_c = report.v_true[i]
        r_abs = report.rate_abs[i]
        ln_r = math.log(r_abs) if r_abs > 0.0 else -math.inf
        vis_rows.append([
            b, abs(v_c), wrap_phase(cmath.phase(v_c)),
            est.V_a_hat, est.V_p_hat, est.dV_a, est.dV_p,
            report.xi[i], report.concurrence[i], report.rate_norm[i],
            ln_r, ln_r / math.log(10.0) if math.isfinite(ln_r) else -math.inf,
            est.N_used,
        ])
    _write_csv(outdir / "visibility.csv",
               ["B", "V_a_true", "V_p_true", "V_a_hat", "V_p_hat", "dV_a", "dV_p",
                "xi", "C", "R_M_norm", "ln_R_M", "log10_R_M", "N"],
               vis_rows)

    _write_csv(outdir / "intensity.csv",
               ["theta", "I_true", "I_exact", "I_est"],
               [[t, i_t, i_x, i_e] for t, i_t, i_x, i_e in
                zip(report.theta_grid, report.intensity_true,
                    report.intensity_exact, report.intensity_est)])

    worst = int(np.argmin(report.concurrence))
    dva_scale, dvp_scale = _resource_scales(cfg, report.xi[worst], report.concurrence[worst])
    resource = cfg.channel.resource_factory()(report.baselines[worst])
    summary = {
        "channel": cfg.channel.kind,
        "wavelength": cfg.sky.wavelength,
        "B_max": cfg.plan.B_m,
        "n_baselines": len(report.baselines),
        "N_per_setting": cfg.n_per_setting,
        "seed": cfg.seed,
        "resolution": report.resolution,
        "xi": report.xi[worst],
        "C": report.concurrence[worst],
        "R_M_norm": report.rate_norm[worst],
        "dVa_scale": dva_scale,
        "dVp_scale": dvp_scale,
        "dI": report.error.dI,
        "dI_scale": report.error.scale,
        "error_regime": report.error.regime,
        "low_confidence": report.low_confidence,
        "resource_state": _matrix_json(resource.to_density().entries),
    }
    with open(outdir / "summary.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    if gnuplot:
        _emit_gnuplot(outdir, "run")
    return 0


def _apply_override(raw: dict, name: str, value: float) -> dict:
    out = copy.deepcopy(raw)
    if name in ("B", "L"):
        pass  # handled as the evaluation baseline, not via the plan
    elif name in ("N", "N_per_setting"):
        n = int(value)
        if n < 1 or n != value:
            raise ConfigError("sweep.N_per_setting", f"value {value} is not a positive integer")
        out["N_per_setting"] = n
    elif name in ("R_E", "R_T"):
        out.setdefault("rates", {"R_E": 1.0, "R_T": 1.0})[name] = value
    elif name in ("w1", "w2"):
        out.setdefault("phase_settings", {"w1": 0.0, "w2": 0.5 * math.pi})[name] = value
    elif name in SWEEPABLE_CHANNEL_PARAMS:
        if not isinstance(out.get("channel"), dict):
            raise ConfigError("channel", "expected an object")
        out["channel"][name] = value
    else:
        raise ConfigError(f"sweep.param.{name}", "not a sweepable parameter")
    return out


def cmd_sweep(config_path: str, param: str, values, mc_replicates: int = 0,
              gnuplot: bool = False) -> int:
    try:
        with open(config_path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("config", str(exc))
    base = parse_config(raw)  # validate the base before touching overrides
    rows = []
    for row_index, value in enumerate(values):
        cfg = parse_config(_apply_override(raw, param, value))
        b_eval = float(value) if param in ("B", "L") else cfg.plan.B_m
        if b_eval < 0.0:
            raise ConfigError("sweep.B", "baseline must be nonnegative")
        resource = cfg.channel.resource_factory()(b_eval)
        xi = subspace_weight(resource)
        try:
            conc = concurrence_subspace(resource)
        except ValueError:
            conc = math.nan
        rate_fn = cfg.channel.rate_norm_fn()
        r_norm = rate_fn(b_eval, xi) if rate_fn is not None else 0.5 * xi
        r_abs = r_norm * cfg.rates.R_E * cfg.rates.R_T
        ln_r = math.log(r_abs) if r_abs > 0.0 else -math.inf
        rmse_va = rmse_vp = None
        if mc_replicates > 0:
            v_c = true_visibility(cfg.sky, b_eval)
            v = AstroVisibility(abs(v_c), cmath.phase(v_c))
            errs_a, errs_p = [], []
            for k in range(mc_replicates):
                est = run_observation(v, resource, cfg.settings, cfg.n_per_setting,
                                      derive_seed(cfg.seed, row_index, k))
                errs_a.append(est.V_a_hat - v.V_a)
                errs_p.append(wrap_phase(est.V_p_hat - v.V_p))
            rmse_va = math.sqrt(float(np.mean(np.square(errs_a))))
            rmse_vp = math.sqrt(float(np.mean(np.square(errs_p))))
        rows.append([value, xi, conc, r_norm, ln_r,
                     ln_r / math.log(10.0) if math.isfinite(ln_r) else -math.inf,
                     rmse_va, rmse_vp])

    outdir = Path(base.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_csv(outdir / "sweep.csv",
               ["value", "xi", "C", "R_M_norm", "ln_R_M", "log10_R_M",
                "rmse_V_a", "rmse_V_p"],
               rows)
    if gnuplot:
        _emit_gnuplot(outdir, "sweep")
    return 0


def cmd_validate(fast: bool = False) -> int:
    return 0 if validation.run_all(fast=fast) else 1


def _parse_values(raw: str):
    try:
        return [float(v) for v in raw.split(",") if v.strip() != ""]
    except ValueError:
        raise ConfigError("sweep.values", f"not a comma-separated number list: {raw!r}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="entbase",
        description="Entanglement-assisted interferometry simulator")
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="run one observation scenario")
    p_run.add_argument("config")
    p_run.add_argument("--gnuplot", action="store_true",
                       help="also emit a plain-text plotting script")

    p_sweep = sub.add_parser("sweep", help="sweep one parameter over a value list")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--param", required=True)
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated list, e.g. 0,10,20")
    p_sweep.add_argument("--mc-replicates", type=int, default=0,
                         help="Monte Carlo replicates per value for the RMSE columns")
    p_sweep.add_argument("--gnuplot", action="store_true")

    p_val = sub.add_parser("validate", help="run the invariant suite")
    p_val.add_argument("--fast", action="store_true", help="skip Monte Carlo invariants")

    args = parser.parse_args(argv)
    try:
        if args.verb == "run":
            return cmd_run(args.config, gnuplot=args.gnuplot)
        if args.verb == "sweep":
            if args.mc_replicates < 0:
                raise ConfigError("sweep.mc_replicates", "must be nonnegative")
            return cmd_sweep(args.config, args.param, _parse_values(args.values),
                             mc_replicates=args.mc_replicates, gnuplot=args.gnuplot)
        return cmd_validate(fast=args.fast)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
