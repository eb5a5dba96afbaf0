import math

import numpy as np
import pytest
from scipy import stats

from cv2x.analysis import Event
from cv2x.channel import db_to_linear, equivalent_densities
from cv2x.errors import ParameterError
from cv2x.geometry import SimWindow
from cv2x.load import typical_cell_length_dist
from cv2x.montecarlo import (TrialConfig, _segments_in_cell, default_window, estimate_coverage,
                             estimate_rate_coverage, measure_tier1_load, measure_tier2_load,
                             run_trial, run_trials, sample_typical_cell_lengths, served_interval,
                             window_doubling_check)
from cv2x.geometry import LineSet, line_points
from cv2x.rng import stream

from conftest import KM, fig5_params


@pytest.fixture(scope="module")
def small_run():
    cfg = TrialConfig(fig5_params(), n_trials=600, master_seed=3, measure_load=True)
    return cfg, run_trials(cfg)


def test_default_window_at_least_10km(fig5):
    assert default_window(fig5).radius >= 10 * KM


def test_small_window_rejected_unless_overridden(fig5):
    with pytest.raises(ParameterError):
        TrialConfig(fig5, SimWindow(2 * KM))
    TrialConfig(fig5, SimWindow(2 * KM), truncation_check=False)


def test_trial_is_deterministic(fig5):
    cfg = TrialConfig(fig5, n_trials=5, master_seed=99, measure_load=True)
    assert run_trial(cfg, 4) == run_trial(cfg, 4)
    assert run_trial(cfg, 3) != run_trial(cfg, 4)


def test_load_measurement_leaves_sir_untouched(fig5):
    a = TrialConfig(fig5, n_trials=30, master_seed=5)
    b = TrialConfig(fig5, n_trials=30, master_seed=5, measure_load=True)
    for i in range(30):
        x, y = run_trial(a, i), run_trial(b, i)
        assert (x.event, x.sir, x.serving_distance) == (y.event, y.sir, y.serving_distance)
        assert x.tagged_load is None and y.tagged_load >= 1


def test_parallel_schedule_is_bit_identical(fig5, monkeypatch):
    cfg = TrialConfig(fig5, n_trials=400, master_seed=8)
    monkeypatch.setenv("CV2X_THREADS", "1")
    serial = run_trials(cfg)
    monkeypatch.setenv("CV2X_THREADS", "2")
    assert run_trials(cfg) == serial
    assert run_trials(cfg, 100, 200) == serial[100:200]


def test_no_rejections_with_default_window(small_run):
    _, out = small_run
    assert all(o.attempts == 1 for o in out)
    assert all(o.sir > 0 and math.isfinite(o.sir) for o in out)


def test_coverage_curve_shape(small_run):
    cfg, out = small_run
    curve = estimate_coverage(cfg, db_to_linear(np.arange(-10, 25, 5.0)), out)
    assert np.all(np.diff(curve.estimate) <= 0)
    # the on-road tier-2 tail keeps P(SIR > 60 dB) near 0.02 analytically
    assert estimate_coverage(cfg, [db_to_linear(60)], out).estimate[0] < 0.05
    assert np.allclose(curve.ci_halfwidth, 1.96 * np.sqrt(curve.estimate * (1 - curve.estimate) / 600), rtol=1e-3)


def test_rate_curve_limits_and_bandwidth_scaling(small_run):
    cfg, out = small_run
    assert estimate_rate_coverage(cfg, [1e-3], out).estimate[0] == 1.0
    wide = TrialConfig(cfg.params.replace(W=2 * cfg.params.W), cfg.window, cfg.master_seed,
                       cfg.n_trials, measure_load=True)
    a = estimate_rate_coverage(wide, [2e6, 8e6], out).estimate
    b = estimate_rate_coverage(cfg, [1e6, 4e6], out).estimate
    assert np.array_equal(a, b)


def test_tier2_loads_without_receivers():
    cfg = TrialConfig(fig5_params(lambda_r=0.0), n_trials=150, master_seed=2, measure_load=True)
    emp = measure_tier2_load(cfg)
    assert emp.n > 0 and np.all(emp.loads == 1)


def test_tier2_load_campbell(small_run):
    cfg, out = small_run
    emp = measure_tier2_load(cfg, out)
    lam_r = cfg.params.lambda_r
    diff = emp.loads - 1 - lam_r * emp.lengths
    assert abs(diff.mean()) < 3 * diff.std(ddof=1) / math.sqrt(emp.n)


def test_tier1_load_trivial():
    cfg = TrialConfig(fig5_params(lambda_2=0.0, lambda_r=0.0), n_trials=50, master_seed=2,
                      measure_load=True)
    res = measure_tier1_load(cfg)
    assert res.n > 40 and res.mean == 1.0


def test_served_interval_against_brute_force():
    rng = stream(17)
    k = 2.3
    for _ in range(30):
        others = rng.uniform(-3000, 3000, 6)
        t1 = rng.uniform(-3000, 3000, (8, 2))
        lo, hi = served_interval(0.0, others, t1, k, 5000.0)
        u = np.linspace(-5000, 5000, 40001)
        nearest = np.min(np.abs(u[:, None] - others[None, :]), axis=1) > np.abs(u)
        d1 = np.hypot(u[:, None] - t1[None, :, 0], t1[None, :, 1])
        ok = nearest & np.all(d1 > k * np.abs(u)[:, None], axis=1)
        served = u[ok]
        assert served.min() == pytest.approx(lo, abs=0.5)
        assert served.max() == pytest.approx(hi, abs=0.5)
        # the served set is an interval
        assert ok[(u >= lo + 1) & (u <= hi - 1)].all()


def test_segments_in_cell_against_brute_force():
    rng = stream(18)
    y = rng.uniform(-2000, 2000, (25, 2))
    lines = LineSet(rng.uniform(0, 1500, 12), rng.uniform(0, 2 * math.pi, 12)).with_typical_line()
    lo, hi = _segments_in_cell(lines, y[0], y[1:], 5000.0)
    for j in range(len(lines)):
        t = np.linspace(-5000, 5000, 20001)
        pts = line_points(lines.rho[j], lines.theta[j], t)
        inside = np.argmin(np.hypot(pts[:, None, 0] - y[None, :, 0], pts[:, None, 1] - y[None, :, 1]), axis=1) == 0
        inside &= np.hypot(*pts.T) <= 5000
        if inside.any():
            assert t[inside].min() == pytest.approx(lo[j], abs=1.0)
            assert t[inside].max() == pytest.approx(hi[j], abs=1.0)
        else:
            assert hi[j] - lo[j] < 1.0


def test_window_doubling(fig5):
    chk = window_doubling_check(TrialConfig(fig5, n_trials=800, master_seed=4), beta=1.0)
    assert chk.passed, chk


def test_typical_cell_lengths_fit(fig5, fig5_eq):
    z = sample_typical_cell_lengths(fig5, 1500, 12)
    d = typical_cell_length_dist(fig5_eq)
    cdf = d.cdf()
    p = stats.kstest(z, lambda x: np.interp(x, d.grid, cdf)).pvalue
    assert p > 0.01


def test_planar_mode_is_sir_only(fig5):
    with pytest.raises(ParameterError):
        TrialConfig(fig5, planar_tier2=True, measure_load=True)
    out = run_trials(TrialConfig(fig5, n_trials=50, planar_tier2=True))
    assert {o.event for o in out} <= {Event.E1, Event.E2}
