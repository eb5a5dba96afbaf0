"""End-to-end acceptance checks: analytic results against Monte-Carlo.

Each test prints (and the session summary repeats) one PASS/FAIL line.
"""

import math
import time

import numpy as np
import pytest
from scipy import stats

from cv2x.analysis import (CoverageQuery, Event, association_prob, coverage_probability,
                           laplace_exponent, laplace_transform, laplace_transform_derivatives,
                           serving_cdf, serving_pdf)
from cv2x.channel import EquivalentDensities, db_to_linear, equivalent_densities
from cv2x.geometry import void_prob_cox_disc, void_prob_ppp_disc
from cv2x.load import (RateQuery, rate_coverage, rate_model, tagged_cell_length_dist,
                       tier1_mean_load, tier2_load_pmf, typical_cell_length_dist)
from cv2x.montecarlo import (TrialConfig, association_fraction, estimate_coverage,
                             estimate_rate_coverage, measure_tier1_load, measure_tier2_load,
                             run_trial, run_trials, serving_distances, void_frequency,
                             window_doubling_check)

from conftest import KM, fig5_params

SEED = 1
N_COVERAGE = 20_000
N_TOTAL = 30_000   # enough for >= 5000 tier-1 serving-distance samples
BETAS_DB = [-10, -5, 0, 5, 10]


@pytest.fixture(scope="module")
def big_run():
    cfg = TrialConfig(fig5_params(), n_trials=N_TOTAL, master_seed=SEED, measure_load=True)
    t0 = time.perf_counter()
    out = run_trials(cfg)
    return cfg, out, time.perf_counter() - t0


def test_c1_fig5_coverage(big_run, fig5, report):
    cfg, out, secs = big_run
    sub = out[:N_COVERAGE]
    betas = db_to_linear(np.array(BETAS_DB, dtype=float))
    mc = estimate_coverage(cfg, betas, sub)
    an = np.array([coverage_probability(CoverageQuery(b, fig5)) for b in betas])
    gap = np.abs(an - mc.estimate)
    ok = bool(np.all(gap <= 0.015))
    detail = ", ".join(f"{b:+d}dB a={a:.4f} mc={m:.4f}" for b, a, m in zip(BETAS_DB, an, mc.estimate))
    report("C1 Fig-5 coverage", ok,
           f"max |gap| {gap.max():.4f} (tol 0.015); {detail}; "
           f"~{secs * N_COVERAGE / N_TOTAL:.0f}s for {N_COVERAGE} trials incl. load measurement")
    assert ok


def test_c2_association(big_run, report):
    cfg, out, _ = big_run
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        p = fig5_params(lambda_1=rng.uniform(0.05, 5) / KM ** 2, lambda_2=rng.uniform(0.1, 20) / KM,
                        mu_l=rng.uniform(1, 20) / KM, B1=db_to_linear(rng.uniform(-20, 20)),
                        B2=db_to_linear(rng.uniform(-20, 20)), sigma_1=rng.uniform(0, 8),
                        sigma_20=rng.uniform(0, 8), P1=10 ** rng.uniform(-1, 2))
        eq = equivalent_densities(p)
        worst = max(worst, abs(association_prob(eq, Event.E1) + association_prob(eq, Event.E2) - 1))
    eq = equivalent_densities(cfg.params)
    frac, ci = association_fraction(cfg, out[:N_COVERAGE])
    pe2 = association_prob(eq, Event.E2)
    ok = worst < 1e-12 and abs(frac - pe2) <= ci
    report("C2 association", ok,
           f"max |P(E1)+P(E2)-1| = {worst:.1e}; MC P(E2) {frac:.4f} +/- {ci:.4f} vs {pe2:.4f}")
    assert ok


def test_c3_void_probability(report):
    lam_l, lp = 10 / math.pi / KM, 4 / KM
    n = 100_000
    lines = []
    ok = True
    for i, r in enumerate((200.0, 500.0, 1000.0)):
        a = void_prob_cox_disc(lam_l, lp, r)
        f = void_frequency(10 / KM, lp, r, n, 300 + i)
        sig = math.sqrt(max(a * (1 - a), 1e-300) / n)
        good = abs(f - a) <= 3 * sig
        ok &= good
        target = void_prob_ppp_disc(math.pi * lam_l * lp, r)
        gaps = [abs(void_prob_cox_disc(lam_l * s, lp / s, r) - target) for s in (1, 10, 100)]
        mono = gaps[0] >= gaps[1] >= gaps[2] and gaps[2] < 1e-3
        ok &= mono
        lines.append(f"r={r / KM:g}km a={a:.3e} mc={f:.3e} gaps={['%.1e' % g for g in gaps]}")
    report("C3 void probability", ok, "; ".join(lines))
    assert ok


def test_c4_serving_distance_laws(big_run, fig5_eq, report):
    _, out, _ = big_run
    parts, ok = [], True
    for ev in (Event.E1, Event.E2):
        s = serving_distances(out, ev)
        p = stats.kstest(s, lambda r: serving_cdf(r, fig5_eq, ev)).pvalue
        good = s.size >= 5000 and p > 0.01
        ok &= good
        parts.append(f"{ev.name}: n={s.size} KS p={p:.3f}")
    report("C4 serving distance", ok, "; ".join(parts))
    assert ok


def test_c5_laplace(fig5, fig5_eq, report):
    unit = all(laplace_transform_derivatives(0.0, r, fig5_eq, fig5, ev, 0)[0] == 1.0
               for r in (10.0, 500.0) for ev in (Event.E1, Event.E2))
    lam2a = 3e-5
    eq1 = EquivalentDensities(0.0, 0.0, lam2a, 0.02, 4.0)
    rel_cf = max(abs(laplace_exponent(s, 100.0, eq1, fig5, Event.E1, 1e-10)
                     / (-math.pi ** 2 * lam2a * math.sqrt(s * fig5.P2 * fig5.g2) / 2) - 1)
                 for s in (1e3, 1e8, 1e13))
    p2 = fig5.replace(m1=2)
    rel_fd = 0.0
    for s in (3e8, 3e10):
        d = laplace_transform_derivatives(s, 250.0, fig5_eq, p2, Event.E1, 1, 1e-11)[1]
        h = 1e-5 * s
        fd = (laplace_transform(s + h, 250.0, fig5_eq, p2, Event.E1, 1e-11)
              - laplace_transform(s - h, 250.0, fig5_eq, p2, Event.E1, 1e-11)) / (2 * h)
        rel_fd = max(rel_fd, abs(d / fd - 1))
    ok = unit and rel_cf <= 1e-8 and rel_fd <= 1e-4
    report("C5 Laplace transform", ok,
           f"L(0)=1: {unit}; closed-form rel err {rel_cf:.1e}; derivative vs FD rel err {rel_fd:.1e}")
    assert ok


def test_c6_tier2_load_cdf(big_run, fig5_eq, report):
    cfg, out, _ = big_run
    emp = measure_tier2_load(cfg, out)
    pmf = tier2_load_pmf(fig5_eq, cfg.params.lambda_r)
    ca = pmf.cdf()
    j_hi = max(pmf.j_max, int(emp.loads.max()))
    sup = max(abs((ca[min(j, pmf.j_max)]) - emp.cdf_at(j)) for j in range(1, j_hi + 1))
    ok = sup <= 0.03
    report("C6 Fig-8 load CDF", ok,
           f"sup |F_a - F_mc| = {sup:.4f} over {emp.n} tier-2 trials (tol 0.03); "
           f"mean load a={pmf.mean():.3f} mc={emp.loads.mean():.3f}")
    assert ok


def test_c7_tier1_mean_load(big_run, fig5_eq, report):
    cfg, out, _ = big_run
    p = cfg.params
    mc = measure_tier1_load(cfg, out)
    an = tier1_mean_load(fig5_eq, p.lambda_r, p.mu_l)
    rel = abs(mc.mean / an - 1)
    p0 = fig5_params(lambda_2=0.0)
    cfg0 = TrialConfig(p0, n_trials=2000, master_seed=SEED, measure_load=True)
    mc0 = measure_tier1_load(cfg0)
    an0 = tier1_mean_load(equivalent_densities(p0), p0.lambda_r, p0.mu_l)
    rel0 = abs(mc0.mean / an0 - 1)
    ok = rel <= 0.07 and rel0 <= 0.05
    report("C7 tier-1 mean load", ok,
           f"Fig-9: a={an:.2f} mc={mc.mean:.2f}+/-{1.96 * mc.se:.2f} ({rel:.1%}, tol 7%, "
           f"n={mc.n}, flagged {mc.flagged_fraction:.1%}); lambda2=0: a={an0:.1f} "
           f"mc={mc0.mean:.1f} ({rel0:.1%}, tol 5%)")
    assert ok


def test_c8_rate_coverage(big_run, fig5, report):
    cfg, out, _ = big_run
    targets = [1e6, 10e6]
    mc = estimate_rate_coverage(cfg, targets, out)
    model = rate_model(fig5)
    an = np.array([rate_coverage(RateQuery(t, fig5), model) for t in targets])
    gap = np.abs(an - mc.estimate)
    ok = bool(np.all(gap <= 0.03))
    report("C8 Fig-9 rate coverage", ok,
           ", ".join(f"T={t / 1e6:g}Mbps a={a:.4f} mc={m:.4f}" for t, a, m in zip(targets, an, mc.estimate))
           + f"; max gap {gap.max():.4f} (tol 0.03)")
    assert ok


def _pc(**kw):
    base = dict(mu_l=5 / KM, P1=db_to_linear(43) / 1000)
    base.update(kw)
    return coverage_probability(CoverageQuery(1.0, fig5_params(**base)))


def test_c9_trends(report):
    b2 = np.arange(-10, 21, 2.5)
    curve = [_pc(lambda_1=2 / KM ** 2, lambda_2=2 / KM, B2=db_to_linear(b)) for b in b2]
    i = int(np.argmax(curve))
    interior = 0 < i < len(b2) - 1
    lo, hi = 0.25 / KM ** 2, 0.5 / KM ** 2
    d0 = _pc(lambda_1=hi, lambda_2=5 / KM) - _pc(lambda_1=lo, lambda_2=5 / KM)
    d15 = (_pc(lambda_1=hi, lambda_2=5 / KM, B1=db_to_linear(15))
           - _pc(lambda_1=lo, lambda_2=5 / KM, B1=db_to_linear(15)))
    cross = d0 > 0 > d15
    rc = []
    for l2 in (2, 4, 6, 8):
        p = fig5_params(mu_l=5 / KM, P1=db_to_linear(43) / 1000, lambda_2=l2 / KM)
        rc.append(rate_coverage(RateQuery(10e6, p)))
    increasing = all(a < b for a, b in zip(rc, rc[1:]))
    ok = interior and cross and increasing
    report("C9 trends", ok,
           f"P_c(B2) max at {b2[i]:g} dB (interior {interior}); P_c(0.5)-P_c(0.25): "
           f"{d0:+.4f} at B1=0, {d15:+.4f} at B1=15 dB; R_c(lambda2=2..8) {np.round(rc, 4).tolist()}")
    assert ok


def test_c10_invariants(fig5, fig5_eq, report):
    checks = {}
    for ev in (Event.E1, Event.E2):
        from scipy import integrate
        tot = integrate.quad(lambda r: serving_pdf(r, fig5_eq, ev), 0, np.inf, limit=200)[0]
        checks[f"serving pdf {ev.name} norm"] = abs(tot - 1) < 1e-8
    typ = typical_cell_length_dist(fig5_eq)
    tag = tagged_cell_length_dist(typ)
    checks["cell length norm"] = abs(typ.total_mass() - 1) < 1e-3 and abs(tag.total_mass() - 1) < 1e-3
    checks["size bias"] = tag.mean > typ.mean
    pmf = tier2_load_pmf(fig5_eq, fig5.lambda_r, typical=typ)
    checks["load pmf sum"] = abs(pmf.probs.sum() - 1) < 1e-6
    pcs = [coverage_probability(CoverageQuery(db_to_linear(b), fig5)) for b in BETAS_DB]
    checks["P_c decreasing"] = all(a > b for a, b in zip(pcs, pcs[1:]))
    model = rate_model(fig5)
    rcs = [rate_coverage(RateQuery(t * 1e6, fig5), model) for t in (1, 5, 10, 50)]
    checks["R_c non-increasing"] = all(a >= b for a, b in zip(rcs, rcs[1:]))
    vs = [void_prob_cox_disc(10 / math.pi / KM, 4 / KM, r) for r in (100, 200, 400)]
    checks["void monotone"] = vs[0] >= vs[1] >= vs[2]
    cfg = TrialConfig(fig5, n_trials=10, master_seed=77, measure_load=True)
    checks["determinism"] = run_trial(cfg, 7) == run_trial(cfg, 7)
    chk = window_doubling_check(TrialConfig(fig5, n_trials=1500, master_seed=SEED), beta=1.0)
    checks["window doubling"] = chk.passed
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    report("C10 invariants", ok,
           f"{sum(checks.values())}/{len(checks)} hold"
           + (f"; failed: {failed}" if failed else "")
           + f"; window check P_c {chk.estimate_small:.4f} vs {chk.estimate_large:.4f} (ci {chk.ci_halfwidth:.4f})")
    assert ok
