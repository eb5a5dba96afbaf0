"""Tier-2 cell lengths, load distributions and rate coverage.

Cell lengths are built on the equivalent model: a tier-2 node's cell on its
line ends where either the neighbouring tier-2 node or some tier-1 node
becomes the biased-best server. With k = zeta21^(-1/alpha) a tier-1 node
wins at distance z from the cell edge iff it lies within distance k z of it.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy import stats

from .analysis import Event, association_prob, conditional_coverage
from .channel import equivalent_densities
from .errors import DomainError, NumericError, ParameterError, RegimeError
from .quadrature import integrate_finite

J_HARD_CAP = 10_000
GRID_POINTS = 2048


def _require_k(k):
    if not k > 1:
        raise RegimeError(
            f"k = zeta21^(-1/alpha) = {k:.4g} <= 1: tier-2 nodes always dominate their "
            "neighbourhood and the cell-length model does not apply")


# -- geometry of the tier-1 exclusion region ----------------------------------

def _branch_limits(z0, k):
    return (k - 1) / (k + 1) * z0, (k + 1) / (k - 1) * z0


def _lens_angles(z0, z1, k):
    d = z0 + z1
    ct = (d * d + (k * z0) ** 2 - (k * z1) ** 2) / (2 * k * z0 * d)
    cp = (d * d - (k * z0) ** 2 + (k * z1) ** 2) / (2 * k * z1 * d)
    return np.arccos(np.clip(ct, -1.0, 1.0)), np.arccos(np.clip(cp, -1.0, 1.0))


def lens_area_gamma22(z0, z1, k, check=True):
    """Area of b(z1-point, k z1) minus b(z0-point, k z0) in the partial-overlap branch.

    The two centres are z0 + z1 apart. Valid for
    (k-1)/(k+1) z0 <= z1 <= (k+1)/(k-1) z0.
    """
    z0 = np.asarray(z0, dtype=float)
    z1 = np.asarray(z1, dtype=float)
    if check:
        lo, hi = _branch_limits(z0, k)
        slack = 1e-9 * np.maximum(z0, 1.0)
        if np.any(z1 < lo - slack) or np.any(z1 > hi + slack):
            raise DomainError("z1 outside the partial-overlap branch")
    theta, phi = _lens_angles(z0, z1, k)
    out = (math.pi * k * k * z1 * z1
           - (k * z0) ** 2 * (theta - 0.5 * np.sin(2 * theta))
           - (k * z1) ** 2 * (phi - 0.5 * np.sin(2 * phi)))
    return out if out.ndim else float(out)


def _d_gamma22_dz1(z0, z1, k):
    # d/dz1 of the partial-overlap area: radius term 2 R1 (pi - phi) k plus
    # centre-shift term (chord length) 2 R1 sin(phi), with R1 = k z1
    _, phi = _lens_angles(z0, z1, k)
    return 2 * k * z1 * (k * (math.pi - phi) + np.sin(phi))


def exclusion_area(z0, z1, k):
    """Piecewise area of b(z1-point, k z1) \\ b(z0-point, k z0) over all z1 >= 0."""
    _require_k(k)
    z0, z1 = np.broadcast_arrays(np.asarray(z0, dtype=float), np.asarray(z1, dtype=float))
    lo, hi = _branch_limits(z0, k)
    mid = lens_area_gamma22(z0, np.clip(z1, lo, hi), k, check=False)
    out = np.where(z1 <= lo, 0.0,
                   np.where(z1 >= hi, math.pi * k * k * (z1 * z1 - z0 * z0), mid))
    return out if out.ndim else float(out)


# -- typical cell length -----------------------------------------------------

def _z0_pdf(z0, lam1, lam2, k):
    a = lam1 * math.pi * k * k
    return (2 * lam2 + 2 * a * z0) * np.exp(-2 * lam2 * z0 - a * z0 * z0)


def _piece_integrands(z, lam1, lam2, k):
    """Integrands (in z0) of the three convolution pieces at total length z."""
    a = lam1 * math.pi * k * k

    def p1(z0):
        z1 = z - z0
        return 2 * lam2 * np.exp(-2 * lam2 * z1) * _z0_pdf(z0, lam1, lam2, k)

    def p2(z0):
        z1 = z - z0
        gam = lens_area_gamma22(z0, z1, k, check=False)
        dg = _d_gamma22_dz1(z0, z1, k)
        return (2 * lam2 + lam1 * dg) * np.exp(-2 * lam2 * z1 - lam1 * gam) * _z0_pdf(z0, lam1, lam2, k)

    def p3(z0):
        z1 = z - z0
        # exponents of f_Z1,3 and f_Z0 combined: exp(-2 lam2 z - a z1^2)
        return (2 * lam2 + 2 * a * z1) * (2 * lam2 + 2 * a * z0) * np.exp(-2 * lam2 * z - a * z1 * z1)

    return p1, p2, p3


def typical_cell_length_pdf(z, eq, rtol=1e-10):
    """Density of the length of a typical tier-2 cell at ``z`` (meters).

    Three-piece convolution over the near-edge distance z0 with breakpoints
    (k-1)/(2k) z and (k+1)/(2k) z, each piece by adaptive quadrature.
    """
    if z <= 0:
        return 0.0
    k = eq.k
    _require_k(k)
    lam1, lam2 = eq.lambda1_e, eq.lambda2_e
    p1, p2, p3 = _piece_integrands(z, lam1, lam2, k)
    a, b = (k - 1) / (2 * k) * z, (k + 1) / (2 * k) * z
    src = "load.typical_cell_length_pdf"
    total = integrate_finite(lambda x: float(p3(x)), 0.0, a, rtol=rtol, atol=0.0, source=src)
    total += integrate_finite(lambda x: float(p2(x)), a, b, rtol=rtol, atol=0.0, source=src)
    total += integrate_finite(lambda x: float(p1(x)), b, z, rtol=rtol, atol=0.0, source=src)
    return total


@dataclass(frozen=True)
class CellLengthDist:
    grid: np.ndarray
    pdf: np.ndarray
    mean: float

    def pdf_at(self, z):
        return np.interp(z, self.grid, self.pdf, right=0.0)

    def total_mass(self):
        return float(np.trapezoid(self.pdf, self.grid))

    def cdf(self):
        """Cumulative trapezoid integral on the grid."""
        inc = 0.5 * (self.pdf[1:] + self.pdf[:-1]) * np.diff(self.grid)
        return np.concatenate([[0.0], np.cumsum(inc)])


def cell_length_grid(eq, n=GRID_POINTS, tail=1e-8):
    """Zero followed by ``n - 1`` log-spaced lengths.

    The upper end bounds P(Z0 + Z1 > z) <= 2 exp(-lambda2_e z) below ``tail``
    (each half-cell has a tail no heavier than Exp(2 lambda2_e)).
    """
    lam2 = eq.lambda2_e
    if not lam2 > 0:
        raise ParameterError("tier-2 cell lengths need lambda2_e > 0")
    z_max = math.log(2.0 / tail) / lam2
    return np.concatenate([[0.0], np.geomspace(1e-3 / lam2, z_max, n - 1)])


_GL_X, _GL_W = np.polynomial.legendre.leggauss(96)


def _gl_piece(fun, lo, hi, cosine_map=False):
    """Vectorised fixed-order Gauss-Legendre over [lo, hi] (arrays of limits)."""
    lo = lo[:, None]
    hi = hi[:, None]
    if cosine_map:
        # t = (1 - cos(pi v)) / 2 clusters nodes at both ends, where the
        # partial-overlap integrand has square-root behaviour
        v = 0.5 * (_GL_X + 1.0)
        t = 0.5 * (1.0 - np.cos(math.pi * v))
        jac = 0.5 * math.pi * np.sin(math.pi * v) * 0.5
    else:
        t = 0.5 * (_GL_X + 1.0)
        jac = np.full_like(t, 0.5)
    x = lo + (hi - lo) * t
    return ((hi - lo) * fun(x) * (jac * _GL_W)).sum(axis=1)


def typical_cell_length_dist(eq, n=GRID_POINTS):
    """Typical cell-length density on :func:`cell_length_grid` (vectorised)."""
    k = eq.k
    _require_k(k)
    lam1, lam2 = eq.lambda1_e, eq.lambda2_e
    grid = cell_length_grid(eq, n)
    z = grid[1:]
    zc = z[:, None]
    a = lam1 * math.pi * k * k

    def f1(z0):
        z1 = zc - z0
        return 2 * lam2 * np.exp(-2 * lam2 * z1) * _z0_pdf(z0, lam1, lam2, k)

    def f2(z0):
        z1 = zc - z0
        gam = lens_area_gamma22(z0, z1, k, check=False)
        dg = _d_gamma22_dz1(z0, z1, k)
        return (2 * lam2 + lam1 * dg) * np.exp(-2 * lam2 * z1 - lam1 * gam) * _z0_pdf(z0, lam1, lam2, k)

    def f3(z0):
        z1 = zc - z0
        return (2 * lam2 + 2 * a * z1) * (2 * lam2 + 2 * a * z0) * np.exp(-2 * lam2 * zc - a * z1 * z1)

    lo_b, hi_b = (k - 1) / (2 * k) * z, (k + 1) / (2 * k) * z
    pdf = (_gl_piece(f3, np.zeros_like(z), lo_b)
           + _gl_piece(f2, lo_b, hi_b, cosine_map=True)
           + _gl_piece(f1, hi_b, z))
    pdf = np.concatenate([[0.0], np.maximum(pdf, 0.0)])
    mean = float(np.trapezoid(grid * pdf, grid))
    return CellLengthDist(grid, pdf, mean)


def tagged_cell_length_pdf(w, typical):
    """Length-biased density w f_typ(w) / E[Z_typ]."""
    if not typical.mean > 0:
        raise ParameterError("typical mean cell length must be > 0")
    return np.asarray(w) * typical.pdf_at(w) / typical.mean


def tagged_cell_length_dist(typical):
    """Length-biased version of ``typical`` on the same grid, renormalised so
    its trapezoid integral is exactly one."""
    g = typical.grid
    raw = g * typical.pdf
    norm = float(np.trapezoid(raw, g))
    pdf = raw / norm
    return CellLengthDist(g, pdf, float(np.trapezoid(g * pdf, g)))


# -- loads ---------------------------------------------------------------------

@dataclass(frozen=True)
class LoadPmf:
    """``probs[j]`` = P(J = j); index 0 is unused because J counts the
    typical receiver itself."""

    probs: np.ndarray

    def mean(self):
        return float(np.dot(np.arange(len(self.probs)), self.probs))

    def cdf(self):
        return np.cumsum(self.probs)

    @property
    def j_max(self):
        return len(self.probs) - 1


def tier2_load_pmf(eq, lambda_r, j_trunc_eps=1e-9, typical=None):
    """Load on the tagged tier-2 node: Poisson(lambda_r w) mixed over the
    tagged cell length, shifted by one for the typical receiver."""
    if lambda_r < 0:
        raise ParameterError("lambda_r must be >= 0")
    if lambda_r == 0:
        return LoadPmf(np.array([0.0, 1.0]))
    if typical is None:
        typical = typical_cell_length_dist(eq)
    tag = tagged_cell_length_dist(typical)
    g, f = tag.grid, tag.pdf
    mu = lambda_r * g
    probs = [0.0]
    cum = 0.0
    for j2 in range(J_HARD_CAP):
        pj = float(np.trapezoid(stats.poisson.pmf(j2, mu) * f, g))
        probs.append(pj)
        cum += pj
        if 1.0 - cum < j_trunc_eps and j2 >= lambda_r * tag.mean:
            return LoadPmf(np.array(probs))
    raise NumericError(f"load PMF tail still {1 - cum:.3g} at the hard cap J = {J_HARD_CAP}",
                       estimate=cum, source="load.tier2_load_pmf")


VORONOI_AREA_CONST = 1.28
TYPICAL_CHORD_CONST = 3.216


def mean_line_length_in_tagged_voronoi(lambda1_e, lambda_l):
    """Mean road length inside the tier-1 cell containing the origin:
    1.28 pi lambda_l / lambda1_e (other lines) + 3.216 / (pi sqrt(lambda1_e)) (typical line)."""
    return (VORONOI_AREA_CONST * math.pi * lambda_l / lambda1_e
            + TYPICAL_CHORD_CONST / (math.pi * math.sqrt(lambda1_e)))


def tier1_mean_load(eq, lambda_r, mu_l, typical=None):
    """Mean load on the tagged tier-1 node, counting the typical receiver."""
    if not eq.lambda1_e > 0:
        raise ParameterError("tier-1 mean load needs lambda1_e > 0")
    covered = 0.0
    if eq.lambda2_e > 0:
        if typical is None:
            typical = typical_cell_length_dist(eq)
        covered = eq.lambda2_e * typical.mean
        if covered >= 1:
            raise RegimeError(
                f"tier-2 cells cover a fraction {covered:.3f} >= 1 of each road; "
                "the mean-load formula is invalid here")
    length = mean_line_length_in_tagged_voronoi(eq.lambda1_e, mu_l / math.pi)
    return 1.0 + lambda_r * length * (1.0 - covered)


# -- rate coverage ---------------------------------------------------------------

@dataclass(frozen=True)
class RateQuery:
    target_rate: float
    params: object
    eq: object = None
    j_trunc_eps: float = 1e-9
    quad_tol: float = 1e-8
    force_unit_load: bool = False

    def __post_init__(self):
        if not self.target_rate > 0:
            raise ParameterError("target rate must be > 0")
        if self.eq is None:
            object.__setattr__(self, "eq", equivalent_densities(self.params))


@dataclass(frozen=True)
class RateModel:
    """Pre-computed load quantities shared across target rates."""

    mean_load_1: float
    pmf_2: LoadPmf


def rate_model(params, eq=None, j_trunc_eps=1e-9):
    eq = eq or equivalent_densities(params)
    pe2 = association_prob(eq, Event.E2)
    pe1 = 1.0 - pe2
    typical = typical_cell_length_dist(eq) if eq.lambda2_e > 0 else None
    j1 = tier1_mean_load(eq, params.lambda_r, params.mu_l, typical) if pe1 > 0 else 1.0
    pmf = tier2_load_pmf(eq, params.lambda_r, j_trunc_eps, typical) if pe2 > 0 else LoadPmf(np.array([0.0, 1.0]))
    return RateModel(j1, pmf)


def _beta_for(rate, load, W):
    x = rate * load / W
    return math.inf if x > 1000 else math.expm1(x * math.log(2.0))


def rate_coverage(q, model=None):
    """P(rate > T) with tier-1 nodes at their mean load and the tier-2 load PMF.

    SIR and load are treated as independent; the mean tier-1 load enters the
    exponent as a real number.
    """
    p, eq = q.params, q.eq
    T, W = q.target_rate, p.W
    pe2 = association_prob(eq, Event.E2)
    pe1 = 1.0 - pe2
    if q.force_unit_load:
        j1, pmf = 1.0, LoadPmf(np.array([0.0, 1.0]))
    else:
        model = model or rate_model(p, eq, q.j_trunc_eps)
        j1, pmf = model.mean_load_1, model.pmf_2
    total = 0.0
    if pe1 > 0:
        beta = _beta_for(T, j1, W)
        if math.isfinite(beta):
            total += pe1 * conditional_coverage(beta, eq, p, Event.E1, q.quad_tol)
    if pe2 > 0:
        acc = 0.0
        for j in range(1, len(pmf.probs)):
            pj = pmf.probs[j]
            if pj == 0:
                continue
            beta = _beta_for(T, j, W)
            if not math.isfinite(beta):
                break
            c = conditional_coverage(beta, eq, p, Event.E2, q.quad_tol)
            acc += c * pj
            if c < 1e-15:
                break  # conditional coverage is decreasing in j
        total += pe2 * acc
    return float(min(max(total, 0.0), 1.0))
