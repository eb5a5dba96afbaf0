"""Command-line front end: analytic curves, Monte-Carlo estimates and
validation reports as CSV files.

Exit status: 0 success, 2 configuration error, 3 numeric failure,
4 validation breach.
"""

import argparse
import csv
import logging
import math
import os
import sys
import tempfile

import numpy as np

from . import analysis, geometry, load, montecarlo
from .analysis import CoverageQuery, Event
from .channel import db_to_linear, equivalent_densities
from .config import ConfigError, parse_config, parse_override
from .errors import (DegenerateConditioningError, DomainError, NumericError,
                     ParameterError, RegimeError)
from .geometry import SimWindow

log = logging.getLogger("cv2x")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_BREACH = 0, 2, 3, 4

DEFAULT_OUTPUT = {
    "coverage": "coverage_curve.csv",
    "rate": "rate_curve.csv",
    "assoc": "assoc_curve.csv",
    "load": "load_pmf.csv",
    "voidprob": "void_prob.csv",
    "kfn": "k_function.csv",
}


class ValidationBreach(Exception):
    pass


def _fmt(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.9g}"


def write_csv(path, header, rows):
    """Write atomically: a failure never leaves a partial file behind."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".cv2x-", suffix=".csv", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def _trial_config(cfg, point_cfg, measure_load=False):
    window = SimWindow(cfg.window_m) if cfg.window_m > 0 else None
    return montecarlo.TrialConfig(point_cfg.params, window, cfg["run.seed"], cfg["run.n_trials"],
                                  truncation_check=window is None, measure_load=measure_load)


def _sweep_column(cfg, default):
    var = cfg.sweep_variable
    return default if var in ("metric.beta_db", "metric.target_mbps") else var.split(".")[-1]


def _with_pass(cfg, rows, analytic_col, mc_col, ci_col):
    """Append a pass flag: |analytic - mc| <= max(tol_abs, ci)."""
    tol = cfg["tol.abs"]
    out = []
    for row in rows:
        a, m, ci = row[analytic_col], row[mc_col], row[ci_col]
        ok = a is not None and m is not None and abs(a - m) <= max(tol, ci)
        out.append(list(row) + [bool(ok)])
    return out


def _mc_needed(mode):
    return mode in ("montecarlo", "validate")


def run_coverage(cfg, mode):
    xs = cfg.sweep_values
    shared = cfg.sweep_variable == "metric.beta_db"
    rows = []
    mc_out = None
    for x in xs:
        pc = cfg.at(x)
        params = pc.params
        a = m = ci = None
        if mode != "montecarlo":
            a = analysis.coverage_probability(CoverageQuery(pc.beta, params, quad_tol=cfg["tol.quad"]))
        if _mc_needed(mode):
            tc = _trial_config(cfg, pc)
            if mc_out is None or not shared:
                mc_out = montecarlo.run_trials(tc)
            curve = montecarlo.estimate_coverage(tc, [pc.beta], mc_out)
            m, ci = float(curve.estimate[0]), float(curve.ci_halfwidth[0])
        rows.append([x, a, m, ci])
    header = [_sweep_column(cfg, "beta_db"), "pc_analytic", "pc_mc", "ci95"]
    return header, rows


def run_rate(cfg, mode):
    xs = cfg.sweep_values
    shared = cfg.sweep_variable == "metric.target_mbps"
    rows = []
    mc_out = None
    model = None
    for x in xs:
        pc = cfg.at(x)
        params = pc.params
        a = m = ci = None
        if mode != "montecarlo":
            if model is None or not shared:
                model = load.rate_model(params, j_trunc_eps=cfg["tol.j_trunc"])
            q = load.RateQuery(pc.target_rate, params, j_trunc_eps=cfg["tol.j_trunc"],
                               quad_tol=cfg["tol.quad"])
            a = load.rate_coverage(q, model)
        if _mc_needed(mode):
            tc = _trial_config(cfg, pc, measure_load=True)
            if mc_out is None or not shared:
                mc_out = montecarlo.run_trials(tc)
            curve = montecarlo.estimate_rate_coverage(tc, [pc.target_rate], mc_out)
            m, ci = float(curve.estimate[0]), float(curve.ci_halfwidth[0])
        rows.append([x, a, m, ci])
    header = [_sweep_column(cfg, "target_mbps"), "rc_analytic", "rc_mc", "ci95"]
    return header, rows


def run_assoc(cfg, mode):
    rows = []
    for x in cfg.sweep_values:
        pc = cfg.at(x)
        a = m = ci = None
        if mode != "montecarlo":
            a = analysis.association_prob(equivalent_densities(pc.params), Event.E2)
        if _mc_needed(mode):
            tc = _trial_config(cfg, pc)
            m, ci = montecarlo.association_fraction(tc)
        rows.append([x, a, m, ci])
    header = [cfg.sweep_variable.split(".")[-1], "pe2_analytic", "pe2_mc", "ci95"]
    return header, rows


def run_load(cfg, mode):
    params = cfg.params
    eq = equivalent_densities(params)
    pmf = load.tier2_load_pmf(eq, params.lambda_r, cfg["tol.j_trunc"])
    cdf = pmf.cdf()
    emp = None
    if _mc_needed(mode):
        emp = montecarlo.measure_tier2_load(_trial_config(cfg, cfg, measure_load=True))
    j_max = pmf.j_max
    if emp is not None and emp.n:
        j_max = max(j_max, int(emp.loads.max()))
    rows = []
    for j in range(1, j_max + 1):
        pa = float(pmf.probs[j]) if j <= pmf.j_max else 0.0
        ca = float(cdf[min(j, pmf.j_max)])
        cm = ci = None
        if emp is not None and emp.n:
            cm = emp.cdf_at(j)
            ci = float(montecarlo.binomial_ci(cm, emp.n))
        rows.append([j, pa if mode != "montecarlo" else None,
                     ca if mode != "montecarlo" else None, cm, ci])
    return ["j", "pmf_analytic", "cdf_analytic", "cdf_mc", "ci95"], rows


def run_voidprob(cfg, mode, radii_km):
    params = cfg.params
    lam_l = params.lambda_l
    rows = []
    for i, rk in enumerate(radii_km):
        r = rk * 1000.0
        a = geometry.void_prob_cox_disc(lam_l, params.lambda_2, r)
        ppp = geometry.void_prob_ppp_disc(math.pi * lam_l * params.lambda_2, r)
        m = ci = None
        if _mc_needed(mode):
            m = montecarlo.void_frequency(params.mu_l, params.lambda_2, r, cfg["run.n_trials"],
                                          cfg["run.seed"] + i)
            ci = float(montecarlo.binomial_ci(m, cfg["run.n_trials"]))
        rows.append([rk, a, ppp, m, ci])
    return ["r_km", "void_analytic", "void_ppp", "void_mc", "ci95"], rows


def run_kfn(cfg, mode, radii_km):
    params = cfg.params
    r = np.asarray(radii_km, dtype=float) * 1000.0
    model = geometry.k_function_model(r, params.lambda_l) / 1e6
    est = se = [None] * len(r)
    if _mc_needed(mode):
        est, se = montecarlo.k_function_estimate(params.mu_l, params.lambda_2, r,
                                                 cfg["run.n_trials"], cfg["run.seed"])
        est, se = est / 1e6, montecarlo.Z95 * se / 1e6
    rows = [[rk, a, e, s] for rk, a, e, s in zip(radii_km, model, est, se)]
    return ["r_km", "k_model_km2", "k_mc_km2", "ci95"], rows


FAMILY_RUNNERS = {"coverage": run_coverage, "rate": run_rate, "assoc": run_assoc, "load": run_load}
PASS_COLUMNS = {"coverage": (1, 2, 3), "rate": (1, 2, 3), "assoc": (1, 2, 3), "load": (2, 3, 4)}


def build_parser():
    ap = argparse.ArgumentParser(prog="cv2x", description="C-V2X downlink coverage and rate curves")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("coverage", "rate", "assoc", "load", "voidprob", "kfn", "validate"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="config file (dotted key = value)")
        sp.add_argument("--out", help="output CSV path")
        sp.add_argument("--trials", type=int, help="override run.n_trials")
        sp.add_argument("--seed", type=int, help="override run.seed")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key (repeatable)")
        if name != "validate":
            sp.add_argument("--mode", choices=("analytic", "montecarlo", "validate"))
        if name in ("voidprob", "kfn"):
            sp.add_argument("--radii-km", type=float, nargs="+", default=[0.2, 0.5, 1.0])
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _load_config(args):
    cfg = parse_config(args.config)
    for item in args.set:
        key, value = parse_override(item)
        cfg = cfg.with_key(key, value)
    if args.trials is not None:
        cfg = cfg.with_key("run.n_trials", args.trials)
    if args.seed is not None:
        cfg = cfg.with_key("run.seed", args.seed)
    return cfg


def execute(args):
    cfg = _load_config(args)
    if args.command == "validate":
        mode, family = "validate", cfg["run.family"]
    else:
        mode, family = args.mode or cfg.mode, args.command
    if family in FAMILY_RUNNERS:
        header, rows = FAMILY_RUNNERS[family](cfg, mode)
    elif family == "voidprob":
        header, rows = run_voidprob(cfg, mode, args.radii_km)
    else:
        header, rows = run_kfn(cfg, mode, args.radii_km)
    breach = False
    if mode == "validate":
        cols = PASS_COLUMNS.get(family, (1, 3, 4))
        rows = _with_pass(cfg, rows, *cols)
        header = header + ["pass"]
        breach = not all(r[-1] for r in rows)
    out = args.out or cfg["run.output"] or DEFAULT_OUTPUT[family]
    write_csv(out, header, rows)
    log.info("wrote %s (%d rows)", out, len(rows))
    if breach:
        raise ValidationBreach(f"{sum(not r[-1] for r in rows)} point(s) outside tolerance; see {out}")
    return out


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        execute(args)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, RegimeError, DomainError, DegenerateConditioningError) as exc:
        src = getattr(exc, "source", None)
        where = f" [{src}]" if src else ""
        print(f"numeric error{where}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValidationBreach as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return EXIT_BREACH
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
