"""Command-line entry point: ``cptsense <command> [options]``.

Exit status is 0 on success; on failure a JSON object
``{"error": ..., "message": ...}`` is written to stderr and the status is 1.
"""
import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .bath import autocorrelation_estimate, ou_paths
from .config import ScenarioConfig, load_config
from .crlb import crlb_report
from .harness import (apply_estimators, compare_sse_steady, dump_json, estimator_config,
                      run_scenario, sweep_mismatch, sweep_omega_bias, sweep_omega_optbias,
                      sweep_tau_n, write_config, write_scenario, write_sweep)

TAU_N_PRESET = [0.25e-3, 0.5e-3, 1e-3, 2e-3, 4e-3]
MISMATCH_PRESET = [0.5, 0.8, 1.0, 1.2, 1.5, 2.0]
OMEGA_PRESET = [1.5, 2.0, 2.5, 3.0, 3.5, 4.0]
BIAS_PRESET = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5]


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _resolve(args, base=None):
    cfg = load_config(args.config) if args.config else (base or ScenarioConfig())
    updates = {}
    if args.seed is not None:
        updates["master_seed"] = args.seed
    if args.runs is not None:
        updates["runs"] = args.runs
    return cfg.with_updates(**updates) if updates else cfg


def sse_config():
    """Desk-scale defaults for SSE comparisons: 2 ms runs, 0.5 ms discarded."""
    return ScenarioConfig().with_updates(sim={"duration_s": 2e-3, "t_discard_s": 0.5e-3,
                                              "sse": True})


def _out(args, name):
    out = args.out or os.path.join("cptsense-out", name)
    os.makedirs(out, exist_ok=True)
    return out


def cmd_simulate(args):
    cfg = _resolve(args)
    res = run_scenario(cfg, threads=args.threads)
    out = _out(args, "simulate")
    write_scenario(res, out)
    return res.summary


def _read_counts(path):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    header, body = rows[0], rows[1:]
    if "count" not in header:
        raise ValueError(f"{path}: no 'count' column")
    col = {name: i for i, name in enumerate(header)}
    counts = np.array([int(r[col["count"]]) for r in body], dtype=np.int64)
    t = np.array([float(r[col["t_s"]]) for r in body]) if "t_s" in col else None
    truth_key = next((k for k in ("x_true_rad_s", "x_true") if k in col), None)
    truth = np.array([float(r[col[truth_key]]) for r in body]) if truth_key else None
    return counts, t, truth


def cmd_estimate(args):
    cfg = _resolve(args)
    counts, t, truth = _read_counts(args.input)
    if t is None:
        t = cfg.sim.update_interval_s * np.arange(counts.size)
    ests = apply_estimators(counts[np.newaxis, :], estimator_config(cfg))
    out = _out(args, "estimate")
    write_config(cfg, out, {"input": os.path.basename(args.input)})
    summary = {"version": __version__, "bins": int(counts.size)}
    for name, (est, vf) in ests.items():
        with open(os.path.join(out, f"estimate_{name}.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_index", "t_s", "x_true", "y_n", "x_est"])
            for i in range(counts.size):
                xt = repr(float(truth[i])) if truth is not None else ""
                w.writerow([i, repr(float(t[i])), xt, int(counts[i]), repr(float(est[0, i]))])
        summary[f"valid_from_{name}"] = int(vf)
        if truth is not None:
            mask = (np.arange(counts.size) >= vf) & (t >= cfg.sim.t_discard_s - 1e-12)
            summary[f"var_{name}"] = float(np.mean((est[0, mask] - truth[mask]) ** 2))
    dump_json(summary, os.path.join(out, "summary.json"))
    return summary


def cmd_crlb(args):
    cfg = _resolve(args)
    rep = crlb_report(cfg.cpt_params(), cfg.bath_params())
    out = _out(args, "crlb")
    doc = {"version": __version__, "config": cfg.to_dict(), "g_value": rep.g_value,
           "info_product": rep.info_product, "var_full": rep.var_full,
           "var_causal": rep.var_causal, "causal_assumption_ok": rep.assumption_ok,
           "inputs": rep.inputs}
    dump_json(doc, os.path.join(out, "crlb.json"))
    return doc


def _sweep(kind, cfg, args):
    if kind == "tau-n":
        return sweep_tau_n(cfg, args.tau_n or TAU_N_PRESET, args.threads)
    if kind == "mismatch":
        t = args.tau_n_prime or [f * cfg.bath.tau_n_s for f in MISMATCH_PRESET]
        s = args.sigma_prime or [f * cfg.bath.sigma_mhz for f in MISMATCH_PRESET]
        return sweep_mismatch(cfg, t, s, args.threads)
    omega, bias = args.omega or OMEGA_PRESET, args.bias or BIAS_PRESET
    if kind == "omega-bias":
        return sweep_omega_bias(cfg, omega, bias, args.threads)
    return sweep_omega_optbias(cfg, omega, bias, args.threads)


def cmd_sweep(args):
    cfg = _resolve(args)
    res = _sweep(args.kind, cfg, args)
    write_sweep(res, cfg, _out(args, f"sweep-{args.kind}"))
    return {"kind": res.kind, "points": len(res.points)}


def cmd_compare_sse(args):
    cfg = _resolve(args, sse_config())
    rep = compare_sse_steady(cfg, threads=args.threads)
    out = _out(args, "compare-sse")
    write_config(cfg, out)
    series = rep.pop("variance_vs_time")
    with open(os.path.join(out, "variance_vs_time.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", "var_ou_sse", "var_ou_steady"])
        for row in zip(series["t_s"], series["sse"], series["steady"]):
            w.writerow([repr(float(v)) for v in row])
    dump_json({"version": __version__, "config": cfg.to_dict(), **rep},
              os.path.join(out, "summary.json"))
    return rep


def cmd_figure(args):
    fig = args.figure
    out = _out(args, f"figure-{fig}")
    if fig == "2a":
        cfg = _resolve(args, ScenarioConfig().with_updates(runs=1000))
        paths = ou_paths(cfg.bath_params(), cfg.sim.duration_s, cfg.sim.update_interval_s,
                         cfg.master_seed, cfg.runs)
        lags, r = autocorrelation_estimate(paths, cfg.sim.duration_s / 2)
        b = cfg.bath_params()
        write_config(cfg, out, {"figure": fig})
        paths[0].to_csv(os.path.join(out, "bath.csv"))
        with open(os.path.join(out, "autocorrelation.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lag_s", "r", "r_model"])
            for lag, val in zip(lags, r):
                model = b.sigma ** 2 * np.exp(-lag / b.tau_n)
                w.writerow([repr(float(lag)), repr(float(val)), repr(float(model))])
        return {"figure": fig, "paths": len(paths)}
    if fig == "3":
        cfg = _resolve(args, ScenarioConfig().with_updates(runs=1, sim={"sse": True}))
        res = run_scenario(cfg, threads=args.threads)
        write_scenario(res, out)
        return res.summary
    if fig == "6b":
        args.out = out
        return cmd_compare_sse(args)
    cfg = _resolve(args)
    if fig == "4a":
        res = sweep_tau_n(cfg, TAU_N_PRESET, args.threads)
    elif fig == "4b":
        res = sweep_mismatch(cfg, [f * cfg.bath.tau_n_s for f in MISMATCH_PRESET],
                             [f * cfg.bath.sigma_mhz for f in MISMATCH_PRESET], args.threads)
    elif fig == "5":
        res = sweep_omega_bias(cfg, OMEGA_PRESET, BIAS_PRESET, args.threads)
    else:
        res = sweep_omega_optbias(cfg, OMEGA_PRESET, BIAS_PRESET, args.threads)
    write_sweep(res, cfg, out)
    return {"figure": fig, "points": len(res.points)}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="scenario JSON")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--seed", type=int, help="override master_seed")
    common.add_argument("--runs", type=int, help="override number of runs")
    common.add_argument("--threads", type=int, default=1, help="worker threads")

    parser = argparse.ArgumentParser(prog="cptsense", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", parents=[common],
                   help="simulate runs and apply all estimators").set_defaults(func=cmd_simulate)
    p = sub.add_parser("estimate", parents=[common], help="estimate from a count CSV")
    p.add_argument("--input", required=True, metavar="CSV",
                   help="CSV with a 'count' column (optional t_s, x_true_rad_s)")
    p.set_defaults(func=cmd_estimate)
    sub.add_parser("crlb", parents=[common],
                   help="closed-form Cramer-Rao bounds").set_defaults(func=cmd_crlb)

    p = sub.add_parser("sweep", parents=[common], help="Monte Carlo parameter sweeps")
    p.add_argument("kind", choices=["tau-n", "mismatch", "omega-bias", "omega-optbias"])
    p.add_argument("--tau-n", type=_floats, metavar="S,S,..", help="memory times (s)")
    p.add_argument("--tau-n-prime", type=_floats, metavar="S,S,..",
                   help="assumed memory times (s)")
    p.add_argument("--sigma-prime", type=_floats, metavar="MHZ,..",
                   help="assumed sigma/2pi (MHz)")
    p.add_argument("--omega", type=_floats, metavar="MHZ,..", help="Rabi/2pi values (MHz)")
    p.add_argument("--bias", type=_floats, metavar="MHZ,..", help="bias/2pi values (MHz)")
    p.set_defaults(func=cmd_sweep)

    sub.add_parser("compare-sse", parents=[common],
                   help="OU-Bayes variance: SSE vs steady-state counts"
                   ).set_defaults(func=cmd_compare_sse)
    p = sub.add_parser("figure", parents=[common], help="data for a figure preset")
    p.add_argument("figure", choices=["2a", "3", "4a", "4b", "5", "6b", "7"])
    p.set_defaults(func=cmd_figure)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.threads < 1:
            raise ValueError("--threads must be >= 1")
        result = args.func(args)
    except Exception as exc:  # noqa: BLE001 - reported as machine-readable JSON
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    if result is not None:
        from .harness import _clean
        json.dump(_clean(result), sys.stdout, sort_keys=True)
        sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
