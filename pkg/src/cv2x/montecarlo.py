"""Monte-Carlo simulator of the original two-tier network.

Each trial places the typical receiver at the origin on the typical line L0
(the x-axis), samples the road layout and both transmitter tiers inside a
disc, draws one shadowing value per node and associates the receiver by
highest biased average received power. SIR counts every non-serving node as
an interferer.

Loads are measured in the shadow-displaced picture used by the analysis:
a node with shadowing X at distance d is treated as sitting at distance
X^(-1/alpha) d. Tier-1 and L0 tier-2 nodes are displaced radially about the
origin; tier-2 nodes on other roads are displaced along their own road about
the foot of its perpendicular, using an own-road shadowing draw.

Random streams: trial ``i`` on attempt ``a`` uses ``trial_stream(seed, i, a)``.
SIR draws are consumed before any load-only draw, so switching load
measurement on does not change the SIR of a trial.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
import math
import os

import numpy as np
from scipy.spatial import Voronoi

from .analysis import Event
from .channel import equivalent_densities, sample_nakagami_power_gain, sample_shadowing
from .errors import ParameterError, RegimeError
from .geometry import (LineSet, PointPattern, SimWindow, k_function_palm, line_points, sample_plp,
                       sample_points_on_lines, sample_ppp_2d)
from .load import LoadPmf
from .rng import trial_stream

MAX_ATTEMPTS = 1000
MIN_WINDOW = 10_000.0
Z95 = 1.959963984540054


def default_window(p):
    """Five characteristic lengths of the sparsest relevant process, at least 10 km."""
    eq = equivalent_densities(p)
    cands = [MIN_WINDOW]
    if eq.lambda1_e > 0:
        cands.append(5.0 / math.sqrt(eq.lambda1_e))
    if eq.lambda2_a > 0:
        cands.append(5.0 / math.sqrt(eq.lambda2_a))
    if eq.lambda2_e > 0:
        cands.append(5.0 / eq.lambda2_e)
    return SimWindow(max(cands))


@dataclass(frozen=True)
class TrialConfig:
    params: object
    window: SimWindow = None
    master_seed: int = 1
    n_trials: int = 1000
    truncation_check: bool = True
    measure_load: bool = False
    planar_tier2: bool = False  # replace off-L0 roads by a planar PPP (diagnostic)

    def __post_init__(self):
        if self.window is None:
            object.__setattr__(self, "window", default_window(self.params))
        if int(self.n_trials) != self.n_trials or self.n_trials < 1:
            raise ParameterError("n_trials must be an integer >= 1")
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise ParameterError("master_seed must be a 64-bit unsigned integer")
        if self.planar_tier2 and self.measure_load:
            raise ParameterError("load measurement needs the road layout; planar_tier2 is SIR-only")
        if self.truncation_check:
            need = default_window(self.params).radius
            if self.window.radius < need * (1 - 1e-12):
                raise ParameterError(
                    f"window radius {self.window.radius:.4g} m is below the truncation "
                    f"heuristic {need:.4g} m (disable truncation_check to override)")


@dataclass(frozen=True)
class SirOutcome:
    event: Event
    sir: float
    serving_distance: float   # shadow-equivalent distance X^(-1/alpha) d
    physical_distance: float
    tagged_load: int = None
    tagged_length: float = None
    flagged: bool = False
    attempts: int = 1


@dataclass(frozen=True)
class EmpiricalCurve:
    x: np.ndarray
    estimate: np.ndarray
    ci_halfwidth: np.ndarray
    n: int


def binomial_ci(p, n):
    return Z95 * np.sqrt(p * (1 - p) / n)


# -- network realisation -------------------------------------------------------

@dataclass
class _Network:
    lines: LineSet
    xy: np.ndarray          # all transmitters, tier 1 first
    tier: np.ndarray
    line_index: np.ndarray  # -1 for tier 1
    t: np.ndarray           # along-line coordinate (NaN for tier 1)
    shadow: np.ndarray
    fading: np.ndarray
    gain: np.ndarray        # gain towards the origin if interfering
    dist: np.ndarray


def _sample_network(p, window, rng, planar_tier2=False):
    if planar_tier2:
        lines = LineSet(np.zeros(0), np.zeros(0)).with_typical_line()
        t2 = sample_points_on_lines(lines, p.lambda_2, window, rng)
        extra = sample_ppp_2d(math.pi * p.lambda_l * p.lambda_2, window, rng)
        t2 = PointPattern(np.concatenate([t2.xy, extra.xy]),
                          np.full(len(t2) + len(extra), 2, dtype=np.int8),
                          np.concatenate([t2.line_index, extra.line_index]),
                          np.concatenate([t2.t, extra.t]))
    else:
        lines = sample_plp(p.mu_l, window, rng).with_typical_line()
        t2 = sample_points_on_lines(lines, p.lambda_2, window, rng)
    t1 = sample_ppp_2d(p.lambda_1, window, rng)
    xy = np.concatenate([t1.xy, t2.xy])
    tier = np.concatenate([np.ones(len(t1), dtype=np.int8), np.full(len(t2), 2, dtype=np.int8)])
    li = np.concatenate([np.full(len(t1), -1), t2.line_index])
    t = np.concatenate([np.full(len(t1), np.nan), t2.t])
    n1 = len(t1)
    on_l0 = li == 0
    off = (tier == 2) & ~on_l0

    shadow = np.empty(len(xy))
    shadow[:n1] = sample_shadowing(p.omega_1, p.sigma_1, rng, n1)
    shadow[on_l0] = sample_shadowing(p.omega_20, p.sigma_20, rng, int(on_l0.sum()))
    shadow[off] = sample_shadowing(p.omega_21, p.sigma_21, rng, int(off.sum()))

    fading = np.empty(len(xy))
    fading[:n1] = sample_nakagami_power_gain(p.m1, rng, n1)
    fading[on_l0] = sample_nakagami_power_gain(p.m20, rng, int(on_l0.sum()))
    fading[off] = sample_nakagami_power_gain(p.m21, rng, int(off.sum()))

    gain = np.empty(len(xy))
    gain[:n1] = np.where(rng.uniform(size=n1) < p.q_c, p.G1, p.g1)
    gain[on_l0] = p.G2
    gain[off] = p.g2
    return _Network(lines, xy, tier, li, t, shadow, fading, gain, np.hypot(xy[:, 0], xy[:, 1]))


@dataclass
class _Association:
    event: Event
    server: int
    sir: float
    eq_dist: float
    dist: float


def _associate(net, p, keep=None):
    """Biased max-average-power association plus SIR; ``keep`` masks nodes."""
    alpha = p.alpha
    keep = np.ones(len(net.xy), dtype=bool) if keep is None else keep
    eqd = net.shadow ** (-1.0 / alpha) * net.dist
    c1 = np.flatnonzero(keep & (net.tier == 1))
    c2 = np.flatnonzero(keep & (net.line_index == 0))
    if c1.size == 0 and c2.size == 0:
        return None
    best = []
    if c1.size:
        i = c1[np.argmin(eqd[c1])]
        best.append((p.B1 * p.P1 * p.G1 * eqd[i] ** -alpha, Event.E1, i, p.P1 * p.G1))
    if c2.size:
        i = c2[np.argmin(eqd[c2])]
        best.append((p.B2 * p.P2 * p.G2 * eqd[i] ** -alpha, Event.E2, i, p.P2 * p.G2))
    # ties go to tier 1
    _, event, srv, pg = max(best, key=lambda b: (b[0], b[1] == Event.E1))
    power = np.where(net.tier == 1, p.P1, p.P2) * net.gain * net.fading * net.shadow * net.dist ** -alpha
    signal = pg * net.fading[srv] * net.shadow[srv] * net.dist[srv] ** -alpha
    interf = power[keep].sum() - (power[srv] if keep[srv] else 0.0)
    sir = signal / interf if interf > 0 else math.inf
    return _Association(event, int(srv), float(sir), float(eqd[srv]), float(net.dist[srv]))


def _draw_trial(cfg, trial_index):
    p = cfg.params
    for attempt in range(MAX_ATTEMPTS):
        rng = trial_stream(cfg.master_seed, trial_index, attempt)
        net = _sample_network(p, cfg.window, rng, cfg.planar_tier2)
        assoc = _associate(net, p)
        if assoc is not None:
            return net, assoc, rng, attempt + 1
    raise RuntimeError(f"trial {trial_index}: no candidate server in {MAX_ATTEMPTS} attempts")


def run_trial(cfg, trial_index):
    net, assoc, rng, attempts = _draw_trial(cfg, trial_index)
    load = length = None
    flagged = False
    if cfg.measure_load:
        if assoc.event == Event.E2:
            load, length = _tier2_load(net, assoc, cfg, rng)
        else:
            load, length, flagged = _tier1_load(net, assoc, cfg, rng)
    return SirOutcome(assoc.event, assoc.sir, assoc.eq_dist, assoc.dist,
                      load, length, flagged, attempts)


# -- loads ---------------------------------------------------------------------

def _k_ratio(p):
    k = equivalent_densities(p).k
    if not k > 1:
        raise RegimeError(f"load measurement assumes k > 1, got k = {k:.4g}")
    return k


def served_interval(t_star, others, tier1_xy, k, half_chord):
    """Points u on the x-axis served by a tier-2 node at ``t_star``.

    The node must be the nearest of the L0 nodes (``others`` excludes it)
    and every tier-1 node y must satisfy |u - y| > k |u - t_star|. For k > 1
    each tier-1 condition keeps the interval between the roots of
    (1 - k^2) u^2 - 2 (p - k^2 t*) u + p^2 + h^2 - k^2 t*^2 with y = (p, h).
    Returns (lo, hi); lo == hi when the set is empty.
    """
    left = others[others < t_star]
    right = others[others > t_star]
    lo = 0.5 * (t_star + left.max()) if left.size else -half_chord
    hi = 0.5 * (t_star + right.min()) if right.size else half_chord
    if len(tier1_xy):
        pp, hh = tier1_xy[:, 0], tier1_xy[:, 1]
        a = 1.0 - k * k
        b = -2.0 * (pp - k * k * t_star)
        c = pp * pp + hh * hh - k * k * t_star * t_star
        disc = np.sqrt(np.maximum(b * b - 4 * a * c, 0.0))
        r1 = (-b + disc) / (2 * a)
        r2 = (-b - disc) / (2 * a)
        lo = max(lo, float(np.minimum(r1, r2).max()))
        hi = min(hi, float(np.maximum(r1, r2).min()))
    return lo, max(lo, hi)


def _displaced_l0(net, p):
    on0 = np.flatnonzero(net.line_index == 0)
    return on0, net.t[on0] * net.shadow[on0] ** (-1.0 / p.alpha)


def _displaced_tier1(net, p):
    i1 = np.flatnonzero(net.tier == 1)
    return i1, net.xy[i1] * net.shadow[i1, None] ** (-1.0 / p.alpha)


def _tier2_load(net, assoc, cfg, rng):
    p = cfg.params
    k = _k_ratio(p)
    on0, tq = _displaced_l0(net, p)
    pos = int(np.flatnonzero(on0 == assoc.server)[0])
    t_star = tq[pos]
    _, y1 = _displaced_tier1(net, p)
    lo, hi = served_interval(t_star, np.delete(tq, pos), y1, k, cfg.window.radius)
    length = hi - lo
    users = rng.poisson(p.lambda_r * length) if p.lambda_r > 0 else 0
    return 1 + int(users), float(length)


def _cell_unreliable(points, tagged, radius):
    """True when the tagged Voronoi cell is unbounded or could be cut by
    nodes outside the window."""
    if len(points) < 4:
        return True
    try:
        vor = Voronoi(points)
    except Exception:
        return True
    region = vor.regions[vor.point_region[tagged]]
    if not region or -1 in region:
        return True
    v = vor.vertices[region]
    reach = np.hypot(*(v - points[tagged]).T) + np.hypot(v[:, 0], v[:, 1])
    return bool(np.any(reach > radius))


def _segments_in_cell(lines, y0, others, radius):
    """Along-line [lo, hi] of each line inside the Voronoi cell of ``y0``."""
    foot = lines.normals() * lines.rho[:, None]
    d = lines.directions()
    half = lines.half_chords(SimWindow(radius))
    lo, hi = -half.copy(), half.copy()
    if len(others):
        diff = others - y0                                      # (n, 2)
        a = 2.0 * d @ diff.T                                    # (L, n)
        c = (others ** 2).sum(1) - (y0 ** 2).sum() - 2.0 * foot @ diff.T
        with np.errstate(divide="ignore", invalid="ignore"):
            bound = c / a
        up = np.where(a > 0, bound, np.inf).min(axis=1)
        dn = np.where(a < 0, bound, -np.inf).max(axis=1)
        dead = np.any((a == 0) & (c < 0), axis=1)
        lo = np.maximum(lo, dn)
        hi = np.where(dead, lo, np.minimum(hi, up))
    return lo, np.maximum(lo, hi)


def _tier1_load(net, assoc, cfg, rng):
    p = cfg.params
    i1, y1 = _displaced_tier1(net, p)
    tagged = int(np.flatnonzero(i1 == assoc.server)[0])
    y0 = y1[tagged]
    flagged = _cell_unreliable(y1, tagged, cfg.window.radius)

    # own-road displacement of tier-2 nodes off L0 (load-only draws)
    off = np.flatnonzero((net.tier == 2) & (net.line_index > 0))
    own = sample_shadowing(p.omega_20, p.sigma_20, rng, off.size)
    disp_t = np.full(len(net.xy), np.nan)
    disp_t[off] = net.t[off] * own ** (-1.0 / p.alpha)
    on0, tq = _displaced_l0(net, p)
    disp_t[on0] = tq

    lo, hi = _segments_in_cell(net.lines, y0, np.delete(y1, tagged, axis=0), cfg.window.radius)
    seg = hi - lo
    road_length = float(seg.sum())
    if p.lambda_r == 0:
        return 1, road_length, flagged
    counts = rng.poisson(p.lambda_r * seg)
    k = equivalent_densities(p).k
    served = 0
    for j in np.flatnonzero(counts):
        u = rng.uniform(lo[j], hi[j], counts[j])
        pts = line_points(net.lines.rho[j], net.lines.theta[j], u)
        d1 = np.hypot(*(pts - y0).T)
        tj = np.sort(disp_t[net.line_index == j])
        if tj.size:
            idx = np.searchsorted(tj, u)
            left = np.abs(u - tj[np.clip(idx - 1, 0, tj.size - 1)])
            right = np.abs(tj[np.clip(idx, 0, tj.size - 1)] - u)
            d2 = np.minimum(left, right)
        else:
            d2 = np.full(u.size, np.inf)
        served += int(np.count_nonzero(d1 <= k * d2))
    return 1 + served, road_length, flagged


# -- batch execution -------------------------------------------------------------

def worker_count():
    raw = os.environ.get("CV2X_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ParameterError(f"CV2X_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ParameterError("CV2X_THREADS must be >= 0")
    return n or (os.cpu_count() or 1)


def _run_chunk(args):
    cfg, lo, hi = args
    return [run_trial(cfg, i) for i in range(lo, hi)]


def run_trials(cfg, start=0, stop=None):
    """Outcomes of trials ``start .. stop-1`` (default: all of ``cfg``), in index order."""
    stop = cfg.n_trials if stop is None else stop
    workers = min(worker_count(), max(1, (stop - start) // 200))
    if workers <= 1:
        return _run_chunk((cfg, start, stop))
    edges = np.linspace(start, stop, 4 * workers + 1).astype(int)
    jobs = [(cfg, int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    with ProcessPoolExecutor(workers) as pool:
        return [o for chunk in pool.map(_run_chunk, jobs) for o in chunk]


def _outcomes(cfg, outcomes):
    return run_trials(cfg) if outcomes is None else outcomes


def estimate_coverage(cfg, betas, outcomes=None):
    """Fraction of trials with SIR above each linear threshold."""
    out = _outcomes(cfg, outcomes)
    sir = np.array([o.sir for o in out])
    betas = np.asarray(betas, dtype=float)
    est = (sir[None, :] > betas[:, None]).mean(axis=1)
    return EmpiricalCurve(betas, est, binomial_ci(est, len(sir)), len(sir))


def association_fraction(cfg, outcomes=None):
    """(fraction of trials served by tier 2, 95% half-width)."""
    out = _outcomes(cfg, outcomes)
    f = float(np.mean([o.event == Event.E2 for o in out]))
    return f, float(binomial_ci(f, len(out)))


def serving_distances(outcomes, event):
    return np.array([o.serving_distance for o in outcomes if o.event == event])


@dataclass(frozen=True)
class EmpiricalLoad:
    loads: np.ndarray
    lengths: np.ndarray
    n: int

    def pmf(self):
        return LoadPmf(np.bincount(self.loads) / self.n)

    def cdf_at(self, j):
        return float(np.mean(self.loads <= j))


def _need_load(cfg):
    return cfg if cfg.measure_load else replace(cfg, measure_load=True)


def measure_tier2_load(cfg, outcomes=None):
    """Tagged tier-2 loads and served lengths over the tier-2 trials."""
    out = outcomes if outcomes is not None else run_trials(_need_load(cfg))
    sel = [o for o in out if o.event == Event.E2 and o.tagged_load is not None]
    loads = np.array([o.tagged_load for o in sel], dtype=int)
    return EmpiricalLoad(loads, np.array([o.tagged_length for o in sel]), len(sel))


@dataclass(frozen=True)
class Tier1Load:
    mean: float
    se: float
    n: int
    flagged_fraction: float


def measure_tier1_load(cfg, outcomes=None):
    """Mean tagged tier-1 load over tier-1 trials whose cell is reliable."""
    out = outcomes if outcomes is not None else run_trials(_need_load(cfg))
    sel = [o for o in out if o.event == Event.E1 and o.tagged_load is not None]
    good = np.array([o.tagged_load for o in sel if not o.flagged], dtype=float)
    flagged = 1.0 - len(good) / len(sel) if sel else 0.0
    if good.size < 2:
        return Tier1Load(float("nan"), float("nan"), int(good.size), flagged)
    return Tier1Load(float(good.mean()), float(good.std(ddof=1) / math.sqrt(good.size)),
                     int(good.size), flagged)


def estimate_rate_coverage(cfg, targets, outcomes=None):
    """P((W / J) log2(1 + SIR) > T) with J the measured tagged load."""
    out = outcomes if outcomes is not None else run_trials(_need_load(cfg))
    if any(o.tagged_load is None for o in out):
        raise ParameterError("rate coverage needs outcomes with measured loads")
    sir = np.array([o.sir for o in out])
    load = np.array([o.tagged_load for o in out], dtype=float)
    rate = cfg.params.W / load * np.log2(1.0 + sir)
    targets = np.asarray(targets, dtype=float)
    est = (rate[None, :] > targets[:, None]).mean(axis=1)
    return EmpiricalCurve(targets, est, binomial_ci(est, len(out)), len(out))


# -- typical cells and window sufficiency ----------------------------------------------

def sample_typical_cell_lengths(p, n, seed, window=None):
    """Cell lengths of a tier-2 node placed at the origin of L0 in the
    equivalent model: L0 carries a PPP of density lambda2_e and tier 1 a
    planar PPP of density lambda1_e."""
    eq = equivalent_densities(p)
    k = _k_ratio(p)
    window = window or default_window(p)
    R = window.radius
    out = np.empty(n)
    for i in range(n):
        rng = trial_stream(seed, i)
        others = rng.uniform(-R, R, rng.poisson(eq.lambda2_e * 2 * R))
        y1 = sample_ppp_2d(eq.lambda1_e, window, rng).xy
        lo, hi = served_interval(0.0, others, y1, k, R)
        out[i] = hi - lo
    return out


@dataclass(frozen=True)
class WindowCheck:
    radius: float
    estimate_small: float
    estimate_large: float
    ci_halfwidth: float

    @property
    def passed(self):
        return abs(self.estimate_large - self.estimate_small) < self.ci_halfwidth


def window_doubling_check(cfg, beta=1.0, n=None):
    """Compare P(SIR > beta) in the configured window against a window of
    twice the radius, on shared realisations: each trial is sampled in the
    large disc and re-evaluated with nodes outside the small disc removed."""
    n = n or cfg.n_trials
    big = replace(cfg, window=SimWindow(2 * cfg.window.radius), measure_load=False)
    small_hits = large_hits = 0
    for i in range(n):
        net, assoc, _, _ = _draw_trial(big, i)
        large_hits += assoc.sir > beta
        inner = _associate(net, cfg.params, keep=net.dist < cfg.window.radius)
        small_hits += inner is not None and inner.sir > beta
    ps, pl = small_hits / n, large_hits / n
    return WindowCheck(cfg.window.radius, ps, pl, float(binomial_ci(ps, n)))


# -- geometry estimators ---------------------------------------------------------------

def void_frequency(mu_l, lambda_p, r, n, seed):
    """Fraction of ``n`` Cox realisations with no point in the disc b(o, r).

    Each realisation draws the lines hitting the disc; the point count on
    all chords together is Poisson with mean lambda_p times total chord length.
    """
    rng = trial_stream(seed, 0)
    lam_l = mu_l / math.pi
    n_lines = rng.poisson(lam_l * 2 * math.pi * r, n)
    rho = rng.uniform(0.0, r, n_lines.sum())
    chord = 2.0 * np.sqrt(r * r - rho * rho)
    owner = np.repeat(np.arange(n), n_lines)
    total = np.bincount(owner, weights=chord, minlength=n)
    counts = rng.poisson(lambda_p * total)
    return float(np.mean(counts == 0))


def k_function_estimate(mu_l, lambda_p, radii, n, seed, model="planar"):
    """Palm K-function estimate seen from a point at the origin of L0.

    ``model="planar"`` uses L0 plus a planar PPP of density pi lambda_l lambda_p;
    ``model="cox"`` uses L0 plus the full line process. Returns (estimate, se).
    """
    radii = np.asarray(radii, dtype=float)
    window = SimWindow(float(radii.max()) * 1.0001)
    lam_l = mu_l / math.pi
    intensity = math.pi * lam_l * lambda_p
    pats = []
    for i in range(n):
        rng = trial_stream(seed, i)
        l0 = LineSet(np.zeros(0), np.zeros(0)).with_typical_line()
        pts = [sample_points_on_lines(l0, lambda_p, window, rng).xy]
        if model == "planar":
            pts.append(sample_ppp_2d(intensity, window, rng).xy)
        elif model == "cox":
            pts.append(sample_points_on_lines(sample_plp(mu_l, window, rng), lambda_p, window, rng).xy)
        else:
            raise ParameterError(f"unknown K-function model {model!r}")
        xy = np.concatenate(pts)
        pats.append(PointPattern(xy, np.full(len(xy), 2, dtype=np.int8),
                                 np.zeros(len(xy), dtype=np.int64), np.zeros(len(xy))))
    return k_function_palm(pats, radii, intensity)
