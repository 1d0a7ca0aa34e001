"""Monte Carlo experiments: scenarios, parameter sweeps and SSE comparison.

Every random stream is derived from ``(master_seed, run_index, purpose)``
so results do not depend on the number of worker threads.
"""
import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .bath import ou_path
from .crlb import crlb_report
from .estimators import (AverageCountEstimator, EstimateSeries, EstimatorConfig,
                         OUBayesEstimator, SimpleBayesEstimator, per_run_mse)
from .photons import (bin_events, bin_truth, sse_trajectory, steady_emission_counts,
                      thin_detect)
from .seeding import derive_rng, derive_seed

ESTIMATORS = ("avg", "simple", "ou")


def _map(func, items, threads):
    if threads <= 1:
        return [func(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def estimator_config(cfg):
    return EstimatorConfig(cpt=cfg.cpt_params(), assumed_bath=cfg.assumed_bath_params(),
                           update_interval=cfg.sim.update_interval_s)


def simulate_run(cfg, run_index, sse=None):
    """Bath path, detected counts and per-bin truth for one run."""
    p = cfg.cpt_params()
    tau = cfg.sim.update_interval_s
    bath = ou_path(cfg.bath_params(), cfg.sim.duration_s, cfg.bath_dt,
                   derive_rng(cfg.master_seed, run_index, "bath"))
    use_sse = cfg.sim.sse if sse is None else sse
    if use_sse:
        traj = sse_trajectory(p, bath, cfg.sse_dt, derive_rng(cfg.master_seed, run_index, "sse"))
        detected = thin_detect(traj.events, p.eta, derive_rng(cfg.master_seed, run_index, "thin"))
        counts = bin_events(detected, tau, bath.t_start, bath.duration)
    else:
        counts = steady_emission_counts(p, bath, tau,
                                        derive_rng(cfg.master_seed, run_index, "counts"))
    return bath, counts, bin_truth(bath, tau)


def apply_estimators(counts, ecfg, which=ESTIMATORS):
    """Estimates for a (runs, bins) count array. Returns ``{name: (array, valid_from)}``."""
    out = {}
    common = dict(cpt=ecfg.cpt, update_interval=ecfg.update_interval)
    if "avg" in which:
        m = AverageCountEstimator(window_bins=ecfg.avg_window_bins, **common).fit()
        out["avg"] = (m.transform(counts), m.valid_from_)
    grid = dict(assumed_bath=ecfg.assumed_bath, grid_halfwidth=ecfg.grid_halfwidth,
                grid_size=ecfg.grid_size, **common)
    if "simple" in which:
        out["simple"] = (SimpleBayesEstimator(**grid).fit().transform(counts), 0)
    if "ou" in which:
        out["ou"] = (OUBayesEstimator(**grid).fit().transform(counts), 0)
    return out


def mse_stats(est, valid_from, truth, tau, discard):
    """Per-run MSE, their mean and standard error."""
    series = [EstimateSeries(0.0, tau, row, valid_from) for row in est]
    mse = per_run_mse(series, list(truth), discard)
    se = float(mse.std(ddof=1) / np.sqrt(mse.size)) if mse.size > 1 else float("nan")
    return mse, float(mse.mean()), se


@dataclass
class ScenarioResult:
    config: object
    truth: np.ndarray
    counts: np.ndarray
    estimates: dict
    summary: dict
    baths: list = field(default_factory=list)


def _crlb_summary(cfg):
    rep = crlb_report(cfg.cpt_params(), cfg.bath_params())
    return {"g_value": rep.g_value, "info_product": rep.info_product,
            "crlb_full": rep.var_full, "crlb_causal": rep.var_causal,
            "causal_assumption_ok": rep.assumption_ok}


def run_scenario(cfg, threads=1, keep_baths=False):
    """Simulate ``cfg.runs`` runs, apply all three estimators, summarise.

    Variances are pooled over runs and over bins at or after
    ``t_discard_s``; standard errors come from the spread of per-run MSEs.
    """
    sims = _map(lambda r: simulate_run(cfg, r), range(cfg.runs), threads)
    counts = np.stack([s[1].counts for s in sims])
    truth = np.stack([s[2] for s in sims])
    ecfg = estimator_config(cfg)
    estimates = apply_estimators(counts, ecfg)
    sigma2 = cfg.bath_params().sigma ** 2
    tau = cfg.sim.update_interval_s
    summary = {"runs": cfg.runs, "sigma2": sigma2,
               "mean_count_per_bin": float(counts.mean()),
               "detected_rate_per_s": float(counts.mean() / tau)}
    for name, (est, vf) in estimates.items():
        _, mean, se = mse_stats(est, vf, truth, tau, cfg.sim.t_discard_s)
        summary[f"var_{name}"] = mean
        summary[f"se_{name}"] = se
        summary[f"var_{name}_over_sigma2"] = mean / sigma2
    summary.update(_crlb_summary(cfg))
    summary["var_ou_over_crlb_causal"] = summary["var_ou"] / summary["crlb_causal"]
    return ScenarioResult(cfg, truth, counts, estimates, summary,
                          [s[0] for s in sims] if keep_baths else [])


# -- sweeps -------------------------------------------------------------------

@dataclass
class SweepResult:
    kind: str
    param_names: list
    points: list  # dicts: swept values, variances, standard errors, bounds

    def column(self, key):
        return np.array([pt[key] for pt in self.points], dtype=float)


_POINT_KEYS = ("var_avg", "se_avg", "var_simple", "se_simple", "var_ou", "se_ou",
               "crlb_full", "crlb_causal", "info_product", "causal_assumption_ok",
               "runs", "mean_count_per_bin", "sigma2")


def point_config(cfg, index, **updates):
    """Config of sweep point ``index``: ``updates`` plus an independent derived seed."""
    return cfg.with_updates(master_seed=derive_seed(cfg.master_seed, index, "point"), **updates)


def _sweep(kind, cfg, grid, threads):
    """``grid`` is a list of ``(values_dict, updates_dict)``."""
    def one(i):
        values, updates = grid[i]
        res = run_scenario(point_config(cfg, i, **updates), threads=1)
        row = dict(values)
        row.update({k: res.summary[k] for k in _POINT_KEYS})
        return row
    names = list(grid[0][0]) if grid else []
    return SweepResult(kind, names, _map(one, range(len(grid)), threads))


def _nonempty(*grids):
    for g in grids:
        if len(g) == 0:
            raise ValueError("sweep grids must be non-empty")


def sweep_tau_n(cfg, values, threads=1):
    """Vary the true (and assumed) bath memory time, in seconds."""
    _nonempty(values)
    grid = [({"tau_n_s": v}, {"bath": {"tau_n_s": v}, "assumed_bath": {"tau_n_s": None}})
            for v in values]
    return _sweep("tau-n", cfg, grid, threads)


def sweep_mismatch(cfg, tau_n_prime, sigma_prime_mhz, threads=1):
    """Vary the estimator's assumed bath parameters at fixed truth."""
    _nonempty(tau_n_prime, sigma_prime_mhz)
    grid = [({"tau_n_prime_s": t, "sigma_prime_mhz": s},
             {"assumed_bath": {"tau_n_s": t, "sigma_mhz": s}})
            for t in tau_n_prime for s in sigma_prime_mhz]
    return _sweep("mismatch", cfg, grid, threads)


def sweep_omega_bias(cfg, omega_mhz, bias_mhz, threads=1):
    _nonempty(omega_mhz, bias_mhz)
    grid = [({"rabi_mhz": o, "bias_mhz": d}, {"cpt": {"rabi_mhz": o, "bias_mhz": d}})
            for o in omega_mhz for d in bias_mhz]
    return _sweep("omega-bias", cfg, grid, threads)


def sweep_omega_optbias(cfg, omega_mhz, bias_mhz, threads=1, full=None):
    """For each Rabi frequency keep the bias with the lowest OU-Bayes variance."""
    full = full or sweep_omega_bias(cfg, omega_mhz, bias_mhz, threads)
    points = []
    for o in omega_mhz:
        rows = [pt for pt in full.points if pt["rabi_mhz"] == o]
        best = min(rows, key=lambda pt: pt["var_ou"])
        points.append(dict(best))
    return SweepResult("omega-optbias", ["rabi_mhz", "bias_mhz"], points)


# -- SSE vs steady-state --------------------------------------------------------

def compare_sse_steady(cfg, threads=1):
    """OU-Bayes variance from quantum-jump counts vs adiabatic Poisson counts.

    Both pipelines see the same bath path in every run; only the photon
    streams differ.
    """
    cfg = cfg.with_updates(sim={"sse": True})
    tau = cfg.sim.update_interval_s

    def one(r):
        bath, sse_counts, truth = simulate_run(cfg, r, sse=True)
        steady = steady_emission_counts(cfg.cpt_params(), bath, tau,
                                        derive_rng(cfg.master_seed, r, "counts"))
        return sse_counts.counts, steady.counts, truth

    sims = _map(one, range(cfg.runs), threads)
    truth = np.stack([s[2] for s in sims])
    ecfg = estimator_config(cfg)
    report = {"runs": cfg.runs, "sigma2": cfg.bath_params().sigma ** 2}
    mses = {}
    per_bin = {}
    for label, idx in (("sse", 0), ("steady", 1)):
        counts = np.stack([s[idx] for s in sims])
        est, vf = apply_estimators(counts, ecfg, which=("ou",))["ou"]
        mse, mean, se = mse_stats(est, vf, truth, tau, cfg.sim.t_discard_s)
        mses[label] = mse
        per_bin[label] = np.mean((est - truth) ** 2, axis=0)
        report[f"var_ou_{label}"] = mean
        report[f"se_ou_{label}"] = se
        report[f"mean_count_per_bin_{label}"] = float(counts.mean())
    combined = float(np.hypot(report["se_ou_sse"], report["se_ou_steady"]))
    diff = report["var_ou_sse"] - report["var_ou_steady"]
    d = mses["sse"] - mses["steady"]
    report.update({
        "difference": diff,
        "combined_se": combined,
        "paired_se": float(d.std(ddof=1) / np.sqrt(d.size)) if d.size > 1 else float("nan"),
        "z_combined": abs(diff) / combined if combined > 0 else float("inf"),
    })
    report["agree_within_2se"] = bool(report["z_combined"] <= 2.0)
    report["variance_vs_time"] = {"t_s": (tau * np.arange(truth.shape[1])).tolist(),
                                  "sse": per_bin["sse"].tolist(),
                                  "steady": per_bin["steady"].tolist()}
    return report


# -- output -------------------------------------------------------------------

def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _header(cfg):
    blob = json.dumps(_clean(cfg.to_dict()), sort_keys=True, separators=(",", ":"))
    return f"# cptsense {__version__} config={blob}\n"


def write_config(cfg, out_dir, extra=None):
    os.makedirs(out_dir, exist_ok=True)
    doc = {"version": __version__, **cfg.resolved()}
    if extra:
        doc.update(extra)
    dump_json(doc, os.path.join(out_dir, "config.json"))


def write_scenario(result, out_dir):
    cfg = result.config
    write_config(cfg, out_dir)
    run_dir = os.path.join(out_dir, "runs")
    os.makedirs(run_dir, exist_ok=True)
    tau = cfg.sim.update_interval_s
    for r in range(result.counts.shape[0]):
        with open(os.path.join(run_dir, f"run_{r:04d}.csv"), "w", newline="") as fh:
            fh.write(_header(cfg))
            w = csv.writer(fh)
            w.writerow(["bin_index", "t_s", "x_true_rad_s", "count",
                        "est_avg", "est_simple", "est_ou"])
            ests = [result.estimates[k][0][r] for k in ESTIMATORS]
            for i in range(result.counts.shape[1]):
                w.writerow([i, repr(float(i * tau)), repr(float(result.truth[r, i])),
                            int(result.counts[r, i])] + [repr(float(e[i])) for e in ests])
    summary = {"version": __version__, "config": cfg.to_dict(), **result.summary,
               "valid_from": {k: int(v[1]) for k, v in result.estimates.items()}}
    dump_json(summary, os.path.join(out_dir, "summary.json"))


def write_sweep(result, cfg, out_dir):
    write_config(cfg, out_dir, {"sweep": result.kind})
    keys = list(result.param_names) + list(_POINT_KEYS)
    with open(os.path.join(out_dir, "sweep.csv"), "w", newline="") as fh:
        fh.write(_header(cfg))
        w = csv.writer(fh)
        w.writerow(keys)
        for pt in result.points:
            w.writerow([repr(float(pt[k])) if isinstance(pt[k], float) else pt[k]
                        for k in keys])
    dump_json({"version": __version__, "config": cfg.to_dict(), "kind": result.kind,
               "points": result.points}, os.path.join(out_dir, "summary.json"))
